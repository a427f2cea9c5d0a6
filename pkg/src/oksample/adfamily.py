"""Two-sample Anderson-Darling permutation tests and their one-vs-K variants.

The statistic is the Scholz & Stephens (1987) k-sample A2_akN with k = 2, the
midrank form that stays exact in the presence of ties.  It depends on the
data only through the pooled ranks, which is what makes label permutation
an exact null.

One-vs-K variants:

PAD
    mean of the K case-vs-control permutation p-values.
CPAD
    PAD recalibrated against leave-one-out PAD values of the controls.
PMAD
    mean p-value of the case against random subsets of the pooled controls
    (assumes homogeneous controls).
ADM
    the two-sample test applied to epoch means, case (one value) vs K.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from numba import njit

from ._seeding import derive_seed
from .errors import EmptySample
from .flr import digest

_REL_EPS = 1e-10


class Method(str, Enum):
    PAD = "PAD"
    CPAD = "CPAD"
    PMAD = "PMAD"
    ADM = "ADM"


@dataclass(frozen=True)
class AdOutcome:
    statistic: float
    p_value: float
    n_perm: int


@dataclass(frozen=True, eq=False)
class OkAdResult:
    method: Method
    p_value: float
    components: np.ndarray = field(repr=False)


def _sample(x) -> np.ndarray:
    a = np.asarray(x, dtype=float).ravel()
    if a.size == 0:
        raise EmptySample("Anderson-Darling test needs nonempty samples")
    return a


@njit(cache=True)
def _perm_count(group, n1, l, Ba, denom, u, observed_cut):
    """Shuffle labels with Fisher-Yates driven by ``u`` and count statistics >= cut.

    ``group[i]`` is the distinct-value index of pooled element i.  Returns the
    raw sums over distinct values (the caller applies the common scale).
    """
    n_perm, N = u.shape[0], group.size
    L = l.size
    perm = np.arange(N)
    f1 = np.zeros(L)
    count = 0
    for p in range(n_perm):
        for i in range(N - 1, 0, -1):
            j = int(u[p, i] * (i + 1))
            if j > i:
                j = i
            t = perm[i]
            perm[i] = perm[j]
            perm[j] = t
        for j in range(L):
            f1[j] = 0.0
        for i in range(n1):
            f1[group[perm[i]]] += 1.0
        cum = 0.0
        total = 0.0
        for j in range(L):
            m = cum + f1[j] / 2.0
            cum += f1[j]
            d = N * m - n1 * Ba[j]
            total += l[j] * d * d / denom[j]
        if total >= observed_cut:
            count += 1
    return count


class _PooledRanks:
    """Tie structure of a pooled sample, shared by all relabelings of it."""

    def __init__(self, z: np.ndarray):
        self.N = z.size
        distinct, inv, counts = np.unique(z, return_inverse=True, return_counts=True)
        self.L = distinct.size
        self.group = inv.astype(np.int64)
        self.order = np.argsort(inv, kind="stable")
        self.starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        l = counts.astype(float)
        self.l = l
        self.Ba = np.cumsum(l) - l / 2.0
        self.denom = self.Ba * (self.N - self.Ba) - self.N * l / 4.0

    def statistic(self, labels: np.ndarray, n1: int) -> np.ndarray:
        """A2_akN for boolean ``labels`` (rows = relabelings, True = sample 1)."""
        labels = np.atleast_2d(labels)
        N = self.N
        if self.L == 1:
            return np.zeros(labels.shape[0])
        f1 = np.add.reduceat(labels[:, self.order].astype(float), self.starts, axis=1)
        Ma1 = np.cumsum(f1, axis=1) - f1 / 2.0
        num = (N * Ma1 - n1 * self.Ba) ** 2
        # both samples contribute the same squared numerator when k = 2
        terms = self.l * num / self.denom
        return self.scale(n1) * terms.sum(axis=1)

    def scale(self, n1: int) -> float:
        N = self.N
        return (N - 1.0) / N**2 * (1.0 / n1 + 1.0 / (N - n1))

    def count_ge(self, n1: int, observed: float, u: np.ndarray) -> int:
        """Number of random relabelings (one per row of ``u``) with statistic >= observed."""
        if self.L == 1:
            return u.shape[0]
        cut = (observed - _REL_EPS * max(1.0, abs(observed))) / self.scale(n1)
        return int(_perm_count(self.group, n1, self.l, self.Ba, self.denom, u, cut))


def ad2_statistic(x, y) -> float:
    """Two-sample Anderson-Darling A2_akN (midranks for ties)."""
    x, y = _sample(x), _sample(y)
    z = np.concatenate([x, y])
    labels = np.zeros(z.size, dtype=bool)
    labels[: x.size] = True
    return float(_PooledRanks(z).statistic(labels, x.size)[0])


def _ge(stats: np.ndarray, observed: float) -> np.ndarray:
    return stats >= observed - _REL_EPS * max(1.0, abs(observed))


def n_assignments(n1: int, n2: int) -> int:
    return math.comb(n1 + n2, n1)


def ad2_pvalue(x, y, n_perm: int = 999, seed=0, exact: bool = False) -> AdOutcome:
    """Permutation p-value ``(1 + #{perm >= obs}) / (1 + n_perm)``.

    With ``exact=True`` every assignment of the pooled values into groups of
    the observed sizes is enumerated instead; ``n_perm`` in the outcome is
    then the number of assignments other than the observed one.
    """
    x, y = _sample(x), _sample(y)
    z = np.concatenate([x, y])
    N, n1 = z.size, x.size
    pr = _PooledRanks(z)
    obs_labels = np.zeros(N, dtype=bool)
    obs_labels[:n1] = True
    observed = float(pr.statistic(obs_labels, n1)[0])
    if exact:
        total = n_assignments(n1, N - n1)
        count = 0
        for chunk in _combination_chunks(N, n1):
            count += int(np.sum(_ge(pr.statistic(chunk, n1), observed)))
        return AdOutcome(observed, count / total, total - 1)
    if n_perm < 99:
        raise ValueError("n_perm must be >= 99")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    count = pr.count_ge(n1, observed, rng.random((n_perm, N)))
    return AdOutcome(observed, (1 + count) / (1 + n_perm), n_perm)


def _combination_chunks(N: int, n1: int, size: int = 4096):
    it = itertools.combinations(range(N), n1)
    while True:
        block = list(itertools.islice(it, size))
        if not block:
            return
        labels = np.zeros((len(block), N), dtype=bool)
        rows = np.repeat(np.arange(len(block)), n1)
        labels[rows, np.asarray(block, dtype=np.intp).ravel()] = True
        yield labels


def pair_pvalue(x, y, n_perm: int = 999, seed: int = 0) -> float:
    """Symmetric pairwise p-value seeded from the content of both samples.

    The same unordered pair gives the same p-value whatever its position in
    a study, so PAD, CPAD and the similarity matrix can share results.
    """
    x, y = _sample(x), _sample(y)
    dx, dy = digest(x), digest(y)
    if (dy, y.size) < (dx, x.size):
        x, y, dx, dy = y, x, dy, dx
    return ad2_pvalue(x, y, n_perm, derive_seed(seed, "pair", dx, dy)).p_value


class PairCache:
    """Memoised :func:`pair_pvalue` keyed by the two sample digests."""

    def __init__(self, n_perm: int = 999, seed: int = 0):
        self.n_perm = n_perm
        self.seed = seed
        self._store: dict[tuple[int, int], float] = {}

    def __call__(self, x, y) -> float:
        x, y = _sample(x), _sample(y)
        key = tuple(sorted((digest(x), digest(y))))
        p = self._store.get(key)
        if p is None:
            p = pair_pvalue(x, y, self.n_perm, self.seed)
            self._store[key] = p
        return p


def pad(case, controls: Sequence, n_perm: int = 999, seed: int = 0,
        cache: PairCache | None = None) -> OkAdResult:
    cache = cache or PairCache(n_perm, seed)
    comps = np.array([cache(case, x) for x in controls])
    if comps.size == 0:
        raise ValueError("at least one control is required")
    return OkAdResult(Method.PAD, float(np.mean(comps)), comps)


def cpad(case, controls: Sequence, n_perm: int = 999, seed: int = 0,
         cache: PairCache | None = None, literal_direction: bool = False) -> OkAdResult:
    """Fraction of leave-one-out control PAD values at most the case PAD value.

    ``literal_direction=True`` counts control values at least the case value.
    """
    K = len(controls)
    if K < 2:
        raise ValueError("CPAD needs at least two controls")
    cache = cache or PairCache(n_perm, seed)
    p_case = pad(case, controls, cache=cache).p_value
    loo = np.array([
        np.mean([cache(controls[k], controls[m]) for m in range(K) if m != k]) for k in range(K)
    ])
    hits = loo >= p_case if literal_direction else loo <= p_case
    return OkAdResult(Method.CPAD, float(np.mean(hits)), loo)


def pmad(case, controls: Sequence, n_subsets: int | None = None, seed: int = 0,
         n_perm: int = 999) -> OkAdResult:
    """Average p-value of the case against random subsets of the pooled controls."""
    y = _sample(case)
    xs = [_sample(x) for x in controls]
    pooled = np.concatenate(xs)
    J = min(x.size for x in xs)
    n_subsets = y.size if n_subsets is None else int(n_subsets)
    if n_subsets < 1:
        raise ValueError("n_subsets must be >= 1")
    rng = np.random.default_rng(derive_seed(seed, "pmad", digest(y), digest(pooled)))
    comps = np.empty(n_subsets)
    for i in range(n_subsets):
        subset = rng.choice(pooled, size=J, replace=False)
        comps[i] = ad2_pvalue(y, subset, n_perm, rng).p_value
    return OkAdResult(Method.PMAD, float(np.mean(comps)), comps)


def adm(case_row, control_rows: Sequence, n_perm: int = 999, seed: int = 0,
        exact_max_k: int = 60) -> OkAdResult:
    """Anderson-Darling test of the case epoch mean against the K control means.

    With K <= ``exact_max_k`` all K + 1 positions of the singleton are
    enumerated; otherwise ``n_perm`` random relabelings are used.
    """
    K = len(control_rows)
    if K < 2:
        raise ValueError("ADM needs at least two controls")
    ybar = np.array([np.mean(_sample(case_row))])
    xbar = np.array([np.mean(_sample(r)) for r in control_rows])
    if K <= exact_max_k:
        out = ad2_pvalue(ybar, xbar, exact=True)
    else:
        out = ad2_pvalue(ybar, xbar, n_perm, derive_seed(seed, "adm", digest(xbar)))
    return OkAdResult(Method.ADM, out.p_value, np.array([out.p_value]))


def ok_ad(method: Method | str, case, controls: Sequence, n_perm: int = 999, seed: int = 0,
          cache: PairCache | None = None) -> OkAdResult:
    method = Method(method)
    if method is Method.PAD:
        return pad(case, controls, n_perm, seed, cache)
    if method is Method.CPAD:
        return cpad(case, controls, n_perm, seed, cache)
    if method is Method.PMAD:
        return pmad(case, controls, seed=seed, n_perm=n_perm)
    return adm(case, controls, n_perm, seed)


PairTest = Callable[[np.ndarray, np.ndarray], float]
