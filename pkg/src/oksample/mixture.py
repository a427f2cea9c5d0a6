"""Univariate Gaussian mixtures: EM fitting, BIC order selection, evaluation.

The EM inner loop is compiled with numba; everything else is plain numpy.
A fit at a given order runs several k-means++-seeded restarts and keeps the
one with the highest log-likelihood.  Order selection maximises

    loglik(p) - 0.5 * log(n) * (3p - 1)

over p = 1..p_max, the smallest order winning ties.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numba
import numpy as np

from ._seeding import derive_seed
from .errors import DegenerateSample, EmptySample

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class EMConfig:
    """Knobs for :func:`fit_em` and :func:`select_order_bic`.

    ``tol`` is an absolute threshold on the per-iteration log-likelihood
    gain.  The variance floor is ``var_floor_rel`` times the sample variance,
    never below ``var_floor_abs``.
    """

    tol: float = 1e-8
    max_iter: int = 500
    restarts: int = 5
    var_floor_rel: float = 1e-6
    var_floor_abs: float = 1e-12
    seed: int = 0

    def with_seed(self, seed: int) -> "EMConfig":
        return replace(self, seed=int(seed))


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        m = np.array(self.means, dtype=float).ravel()
        v = np.array(self.variances, dtype=float).ravel()
        if not (w.size == m.size == v.size) or w.size == 0:
            raise ValueError("weights, means and variances must have the same nonzero length")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must be nonnegative and sum to 1, got {w}")
        if np.any(~np.isfinite(m)) or np.any(~(v > 0)) or np.any(~np.isfinite(v)):
            raise ValueError("means must be finite and variances positive")
        for name, arr in (("weights", w), ("means", m), ("variances", v)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def order(self) -> int:
        return int(self.weights.size)

    @property
    def mean(self) -> float:
        return float(np.dot(self.weights, self.means))

    @classmethod
    def normal(cls, mean: float = 0.0, variance: float = 1.0) -> "GaussianMixture":
        return cls([1.0], [mean], [variance])

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
        }

    def __repr__(self):
        parts = ", ".join(
            f"{w:.3g}*N({m:.3g},{v:.3g})" for w, m, v in zip(self.weights, self.means, self.variances)
        )
        return f"GaussianMixture({parts})"


@dataclass(frozen=True, eq=False)
class FitResult:
    mixture: GaussianMixture
    loglik: float
    n_iter: int
    converged: bool
    degenerate: bool = False
    loglik_trace: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)


@dataclass(frozen=True, eq=False)
class OrderSelection:
    best: FitResult
    best_order: int
    bic_trace: list  # [(order, penalized loglik), ...]
    fits: dict = field(repr=False, default_factory=dict)


def bic_penalty(n: int, order: int) -> float:
    return 0.5 * math.log(n) * (3 * order - 1)


def _as_sample(sample) -> np.ndarray:
    x = np.asarray(sample, dtype=float).ravel()
    if x.size == 0:
        raise EmptySample("sample is empty")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains non-finite values")
    return x


def variance_floor(x: np.ndarray, config: EMConfig) -> float:
    return max(config.var_floor_rel * float(np.var(x)), config.var_floor_abs)


# ---------------------------------------------------------------------------
# compiled kernels
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _kmeanspp_init(x, u, floor, w, mu, var):
    """k-means++ seeding driven by the uniforms ``u`` (length = order)."""
    n = x.size
    p = mu.size
    d2 = np.empty(n)
    idx = min(int(u[0] * n), n - 1)
    mu[0] = x[idx]
    for i in range(n):
        d2[i] = (x[i] - mu[0]) ** 2
    for k in range(1, p):
        total = 0.0
        for i in range(n):
            total += d2[i]
        if total <= 0.0:
            idx = min(int(u[k] * n), n - 1)
        else:
            target = u[k] * total
            acc = 0.0
            idx = n - 1
            for i in range(n):
                acc += d2[i]
                if acc >= target and d2[i] > 0.0:
                    idx = i
                    break
        mu[k] = x[idx]
        for i in range(n):
            dd = (x[i] - mu[k]) ** 2
            if dd < d2[i]:
                d2[i] = dd
    # hard assignment to the nearest centre gives weights and a pooled spread
    counts = np.zeros(p)
    ss = 0.0
    for i in range(n):
        best = 0
        bd = (x[i] - mu[0]) ** 2
        for k in range(1, p):
            dd = (x[i] - mu[k]) ** 2
            if dd < bd:
                bd = dd
                best = k
        counts[best] += 1.0
        ss += bd
    pooled = max(ss / n, floor)
    for k in range(p):
        w[k] = max(counts[k], 1.0)
        var[k] = pooled
    s = w.sum()
    for k in range(p):
        w[k] /= s


@numba.njit(cache=True, fastmath={"reassoc", "contract", "arcp", "nsz"})
def _em_run(x, w, mu, var, floor, tol, max_iter, trace):
    """Run EM in place from (w, mu, var).  Returns (n_iter, loglik, converged).

    ``trace[t]`` receives the log-likelihood of the parameters held at the
    start of iteration t; the parameters left in the arrays on return are the
    ones whose log-likelihood is returned.  ``x`` should be roughly centred:
    the M-step uses one-pass moment sums.
    """
    n = x.size
    p = w.size
    comp = np.empty((p, n))
    mx = np.empty(n)
    s = np.empty(n)
    ll_prev = -np.inf
    ll = -np.inf
    converged = False
    it = 0
    while True:
        for i in range(n):
            mx[i] = -np.inf
            s[i] = 0.0
        for k in range(p):
            if w[k] <= 0.0:
                continue
            a = math.log(w[k]) - 0.5 * (_LOG_2PI + math.log(var[k]))
            b = 0.5 / var[k]
            c = mu[k]
            row = comp[k]
            for i in range(n):
                d = x[i] - c
                v = a - d * d * b
                row[i] = v
                mx[i] = max(mx[i], v)
        for k in range(p):
            if w[k] <= 0.0:
                continue
            row = comp[k]
            for i in range(n):
                ev = math.exp(row[i] - mx[i])
                row[i] = ev
                s[i] += ev
        ll = 0.0
        for i in range(n):
            ll += mx[i] + math.log(s[i])
            s[i] = 1.0 / s[i]
        trace[it] = ll
        if it > 0 and ll - ll_prev < tol:
            converged = True
            break
        if it >= max_iter:
            break
        ll_prev = ll
        # M-step from one-pass responsibility-weighted moments
        for k in range(p):
            if w[k] <= 0.0:
                continue
            row = comp[k]
            a0 = 0.0
            a1 = 0.0
            a2 = 0.0
            for i in range(n):
                r = row[i] * s[i]
                a0 += r
                a1 += r * x[i]
                a2 += r * x[i] * x[i]
            if a0 <= 1e-12:
                w[k] = 0.0
                continue
            mk = a1 / a0
            mu[k] = mk
            var[k] = max(a2 / a0 - mk * mk, floor)
            w[k] = a0 / n
        tot = w.sum()
        for k in range(p):
            w[k] /= tot
        it += 1
    return it, ll, converged


@numba.njit(cache=True)
def _fit_restarts(x, order, uniforms, floor, tol, max_iter):
    """Fit ``order`` components once per row of ``uniforms``; keep the best."""
    r = uniforms.shape[0]
    best_ll = -np.inf
    best_w = np.empty(order)
    best_mu = np.empty(order)
    best_var = np.empty(order)
    best_trace = np.empty(max_iter + 1)
    best_it = 0
    best_conv = False
    w = np.empty(order)
    mu = np.empty(order)
    var = np.empty(order)
    trace = np.empty(max_iter + 1)
    for j in range(r):
        _kmeanspp_init(x, uniforms[j], floor, w, mu, var)
        it, ll, conv = _em_run(x, w, mu, var, floor, tol, max_iter, trace)
        if ll > best_ll:
            best_ll = ll
            best_w[:] = w
            best_mu[:] = mu
            best_var[:] = var
            best_trace[: it + 1] = trace[: it + 1]
            best_it = it
            best_conv = conv
    return best_w, best_mu, best_var, best_ll, best_it, best_conv, best_trace[: best_it + 1].copy()


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------


def _normal_logpdf(x, mean, var):
    return -0.5 * (_LOG_2PI + np.log(var)) - 0.5 * (x - mean) ** 2 / var


def _component_logpdf(mixture: GaussianMixture, x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        lw = np.log(mixture.weights)
    return lw[None, :] + _normal_logpdf(x[:, None], mixture.means[None, :], mixture.variances[None, :])


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    m = np.max(a, axis=1, keepdims=True)
    return (m + np.log(np.sum(np.exp(a - m), axis=1, keepdims=True)))[:, 0]


def log_likelihood(mixture: GaussianMixture, sample) -> float:
    """Sum over the sample of log sum_k w_k N(x | mu_k, var_k)."""
    x = _as_sample(sample)
    return float(np.sum(_logsumexp_rows(_component_logpdf(mixture, x))))


def density(mixture: GaussianMixture, x):
    """Mixture density; scalar in, scalar out, array in, array out."""
    arr = np.asarray(x, dtype=float)
    flat = arr.ravel()
    vals = np.exp(_logsumexp_rows(_component_logpdf(mixture, flat)))
    if arr.ndim == 0:
        return float(vals[0])
    return vals.reshape(arr.shape)


def sample(mixture: GaussianMixture, n: int, seed) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    comp = rng.choice(mixture.order, size=n, p=mixture.weights)
    z = rng.standard_normal(n)
    return mixture.means[comp] + np.sqrt(mixture.variances[comp]) * z


def _sorted_mixture(w, mu, var) -> GaussianMixture:
    order = np.argsort(mu, kind="stable")
    w = np.asarray(w)[order]
    return GaussianMixture(w / w.sum(), np.asarray(mu)[order], np.asarray(var)[order])


def _fit_order_one(x: np.ndarray, floor: float, degenerate: bool) -> FitResult:
    mean = float(np.mean(x))
    var = max(float(np.mean((x - mean) ** 2)), floor)
    mix = GaussianMixture([1.0], [mean], [var])
    ll = log_likelihood(mix, x)
    return FitResult(mix, ll, 1, True, degenerate, np.array([ll]))


def fit_em(sample, order: int, config: EMConfig | None = None) -> FitResult:
    """Maximum-likelihood fit of a ``order``-component mixture by EM.

    Order 1 is solved in closed form.  For larger orders ``config.restarts``
    k-means++ seeded EM runs are made and the best one is returned.
    """
    config = config or EMConfig()
    x = _as_sample(sample)
    if order < 1:
        raise ValueError("order must be >= 1")
    if x.size < order:
        raise ValueError(f"sample of length {x.size} is too short for order {order}")
    floor = variance_floor(x, config)
    degenerate = bool(np.all(x == x[0]))
    if order == 1:
        return _fit_order_one(x, floor, degenerate)
    if degenerate:
        raise DegenerateSample(f"all {x.size} values equal {x[0]!r}; cannot fit {order} components")
    rng = np.random.default_rng(config.seed)
    uniforms = rng.random((max(config.restarts, 1), order))
    shift = float(np.mean(x))
    w, mu, var, ll, it, conv, trace = _fit_restarts(
        x - shift, order, uniforms, floor, float(config.tol), int(config.max_iter)
    )
    return FitResult(_sorted_mixture(w, mu + shift, var), float(ll), int(it), bool(conv), False, trace)


def select_order_bic(sample, p_max: int = 9, config: EMConfig | None = None) -> OrderSelection:
    """Fit orders 1..p_max and keep the BIC-best one (smallest order on ties)."""
    config = config or EMConfig()
    x = _as_sample(sample)
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    if x.size < p_max:
        raise ValueError(f"sample of length {x.size} is too short for p_max={p_max}")
    n = x.size
    fits = {}
    trace = []
    best_order, best_val = None, -np.inf
    for p in range(1, p_max + 1):
        fit = fit_em(x, p, config.with_seed(derive_seed(config.seed, "order", p)))
        val = fit.loglik - bic_penalty(n, p)
        fits[p] = fit
        trace.append((p, val))
        if val > best_val:
            best_order, best_val = p, val
    return OrderSelection(fits[best_order], best_order, trace, fits)


def as_mixture(spec: GaussianMixture | Sequence[Sequence[float]]) -> GaussianMixture:
    """Accept a mixture or a list of ``(weight, mean, variance)`` triples."""
    if isinstance(spec, GaussianMixture):
        return spec
    w, m, v = zip(*spec)
    return GaussianMixture(w, m, v)
