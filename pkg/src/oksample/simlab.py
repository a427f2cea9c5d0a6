"""Synthetic one-vs-K experiments.

Three families of settings ship with the package:

* block 1, heterogeneous normal mixtures (controls split 10/44 between two
  mixture laws, five cases),
* block 2, lognormal cases against homogeneous controls,
* block 3, noncentral t.

Normal components are written ``(mean, variance)`` throughout.

Two readings of blocks 1 and 2 are available.  ``"literal"`` (the default)
takes every density exactly as usually printed.  ``"intended"`` makes the
cases that are meant to be null actually null: case 1.1 uses the minority
control law, and the block 2 controls are standard lognormal, so 2.1 is null.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from ._seeding import derive_seed
from .adfamily import PairCache, adm, cpad, pad, pmad
from .correction import compute_metrics
from .flr import FlrAnalysis, FlrConfig
from .mixture import EMConfig, GaussianMixture, fit_em, sample as draw, select_order_bic

METHODS = ("FLR", "CFLR", "PAD", "CPAD", "PMAD", "ADM")
READINGS = ("literal", "intended")


@dataclass(frozen=True)
class NormalMixtureLaw:
    weights: tuple
    means: tuple
    variances: tuple

    kind = "normal-mixture"

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        comp = rng.choice(len(self.weights), size=n, p=np.asarray(self.weights))
        mu = np.asarray(self.means)[comp]
        sd = np.sqrt(np.asarray(self.variances))[comp]
        return mu + sd * rng.standard_normal(n)

    def mean(self) -> float:
        return float(np.dot(self.weights, self.means))

    def as_mixture(self) -> GaussianMixture:
        return GaussianMixture(self.weights, self.means, self.variances)

    def describe(self) -> str:
        return "+".join(f"{w:g}N({m:g},{v:g})" for w, m, v in zip(self.weights, self.means, self.variances))


@dataclass(frozen=True)
class LognormalLaw:
    mu: float
    sigma: float = 1.0

    kind = "lognormal"

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.lognormal(self.mu, self.sigma, n)

    def mean(self) -> float:
        return math.exp(self.mu + self.sigma**2 / 2)

    def describe(self) -> str:
        return f"LogN({self.mu:g},{self.sigma:g})"


@dataclass(frozen=True)
class NoncentralTLaw:
    df: float
    nc: float

    kind = "noncentral-t"

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal(n) + self.nc
        return z / np.sqrt(rng.chisquare(self.df, n) / self.df)

    def mean(self) -> float:
        return float(stats.nct.mean(self.df, self.nc))

    def describe(self) -> str:
        return f"t({self.df:g},{self.nc:g})"


def normal_mixture(*components) -> NormalMixtureLaw:
    """``normal_mixture((w, mean, var), ...)``."""
    w, m, v = zip(*components)
    return NormalMixtureLaw(tuple(map(float, w)), tuple(map(float, m)), tuple(map(float, v)))


@dataclass(frozen=True)
class SettingSpec:
    setting_id: str
    case_density: object
    control_densities: tuple
    N: int
    K: int
    is_null: bool = field(init=False)

    def __post_init__(self):
        if len(self.control_densities) != self.K:
            raise ValueError("need exactly K control densities")
        object.__setattr__(self, "is_null", self.case_density in set(self.control_densities))

    @property
    def block(self) -> str:
        return self.setting_id.split(".")[0]

    def to_dict(self) -> dict:
        laws = {}
        for d in self.control_densities:
            laws[d.describe()] = laws.get(d.describe(), 0) + 1
        return {"setting": self.setting_id, "case": self.case_density.describe(),
                "controls": laws, "N": self.N, "K": self.K, "is_null": self.is_null}


def _setting1_controls(K: int):
    minority = normal_mixture((0.2, 0, 1), (0.8, 1, 1))
    majority = normal_mixture((0.4, 0, 1), (0.6, 1, 1))
    n_min = min(10, K)
    return minority, majority, (minority,) * n_min + (majority,) * (K - n_min)


def builtin_settings(N: int = 100, K: int = 54, reading: str = "literal",
                     setting3: Mapping[str, tuple] | None = None) -> dict[str, SettingSpec]:
    """All built-in settings keyed by id ("1.1" .. "3.3").

    ``setting3`` overrides the noncentral-t parameters as
    ``{"controls": (df, nc), "3.1": (df, nc), ...}``.  The defaults
    (controls t(5, 0); cases t(5, 0), t(5, 2), t(5, 1)) are our own choice.
    """
    if reading not in READINGS:
        raise ValueError(f"reading must be one of {READINGS}")
    minority, majority, ctrl1 = _setting1_controls(K)
    case11 = normal_mixture((0.2, 0, 1), (0.8, 2, 1)) if reading == "literal" else minority
    cases1 = {
        "1.1": case11,
        "1.2": majority,
        "1.3": normal_mixture((0.1, 0, 1.5), (0.9, 1, 1)),
        "1.4": normal_mixture((0.4, 0, 2), (0.6, 1, 2)),
        "1.5": normal_mixture((0.2, -1, 1), (0.8, 3, 1)),
    }
    ctrl2_law = normal_mixture((1.0, 0, 1)) if reading == "literal" else LognormalLaw(0.0)
    cases2 = {"2.1": LognormalLaw(0.0), "2.2": LognormalLaw(0.5), "2.3": LognormalLaw(1.0)}
    p3 = {"controls": (5, 0), "3.1": (5, 0), "3.2": (5, 2), "3.3": (5, 1)}
    p3.update(setting3 or {})
    cases3 = {k: NoncentralTLaw(*map(float, p3[k])) for k in ("3.1", "3.2", "3.3")}
    ctrl3 = (NoncentralTLaw(*map(float, p3["controls"])),) * K

    out = {}
    for sid, law in cases1.items():
        out[sid] = SettingSpec(sid, law, ctrl1, N, K)
    for sid, law in cases2.items():
        out[sid] = SettingSpec(sid, law, (ctrl2_law,) * K, N, K)
    for sid, law in cases3.items():
        out[sid] = SettingSpec(sid, law, ctrl3, N, K)
    return out


def generate_dataset(spec: SettingSpec, seed: int = 0) -> tuple[np.ndarray, list[np.ndarray]]:
    """Draw ``(case, controls)``.

    Controls depend only on the block, K, N and seed, so every case of a block
    is tested against the same controls for a given seed.
    """
    key = f"{spec.block}:{spec.K}:{spec.N}:" + "|".join(d.describe() for d in spec.control_densities)
    crng = np.random.default_rng(derive_seed(seed, "controls", key))
    controls = [law.sample(spec.N, crng) for law in spec.control_densities]
    yrng = np.random.default_rng(derive_seed(seed, "case", spec.setting_id, spec.case_density.describe()))
    return spec.case_density.sample(spec.N, yrng), controls


# ---------------------------------------------------------------- experiments

@dataclass(frozen=True)
class ExperimentConfig:
    """Per-method settings for :func:`run_experiment`.

    FLR runs at the desk profile by default; pass ``flr=FlrConfig()`` for
    the full-strength fits.
    """

    flr: FlrConfig = field(default_factory=FlrConfig.desk)
    n_perm: int = 999
    pmad_subsets: int | None = None
    alpha: float = 0.05
    reading: str = "literal"
    setting3: Mapping | None = None


@dataclass(frozen=True)
class ResultRow:
    setting: str
    replicate: int
    method: str
    p: float

    def tsv(self) -> str:
        return f"{self.setting}\t{self.replicate}\t{self.method}\t{self.p!r}"


@dataclass
class ExperimentSummary:
    rejection_rates: dict  # setting -> method -> rate
    metrics: dict  # block -> method -> Metrics
    screened_rates: dict = field(default_factory=dict)
    screened_metrics: dict = field(default_factory=dict)
    alpha: float = 0.05

    def to_dict(self) -> dict:
        def mdict(m):
            return {b: {meth: v.to_dict() for meth, v in d.items()} for b, d in m.items()}

        return {
            "alpha": self.alpha,
            "rejection_rates": self.rejection_rates,
            "metrics": mdict(self.metrics),
            "screened": {"rejection_rates": self.screened_rates, "metrics": mdict(self.screened_metrics)},
        }


def _iqr_keep(p: np.ndarray) -> np.ndarray:
    q1, q3 = np.percentile(p, [25, 75])
    spread = 1.5 * (q3 - q1)
    return (p >= q1 - spread) & (p <= q3 + spread)


def summarise(rows: Sequence[ResultRow], specs: Mapping[str, SettingSpec], alpha: float = 0.05,
              screen: bool = False) -> tuple[dict, dict]:
    """Rejection rates per (setting, method) and metrics pooled within each block."""
    by_cell: dict[tuple[str, str], list[float]] = {}
    for r in rows:
        by_cell.setdefault((r.setting, r.method), []).append(r.p)
    rates: dict = {}
    claims: dict = {}
    for (sid, meth), ps in sorted(by_cell.items()):
        p = np.asarray(ps)
        if screen and p.size >= 4:
            p = p[_iqr_keep(p)]
        rej = p <= alpha
        rates.setdefault(sid, {})[meth] = float(rej.mean()) if rej.size else None
        truth = not specs[sid].is_null
        c = claims.setdefault((specs[sid].block, meth), ([], []))
        c[0].extend(rej.tolist())
        c[1].extend([truth] * rej.size)
    metrics: dict = {}
    for (block, meth), (rej, truth) in sorted(claims.items()):
        metrics.setdefault(block, {})[meth] = compute_metrics(rej, truth)
    return rates, metrics


def _validate_methods(methods: Iterable[str]) -> list[str]:
    methods = [m.upper() for m in methods]
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise ValueError(f"unknown methods {bad}; choose from {METHODS}")
    return methods


def run_block_replicate(specs: Sequence[SettingSpec], methods: Sequence[str], replicate: int,
                        root_seed: int, config: ExperimentConfig) -> list[ResultRow]:
    """Every method on every case of one block for one replicate.

    Cases share the replicate's controls, so control-only work (FLR
    bootstrap, control-control AD pairs) is done once.
    """
    seed = derive_seed(root_seed, "replicate", replicate)
    flr_cfg = config.flr
    rows = []
    base: FlrAnalysis | None = None
    cache = PairCache(config.n_perm, derive_seed(seed, "AD"))
    for spec in specs:
        y, xs = generate_dataset(spec, seed)
        for meth in methods:
            if meth in ("FLR", "CFLR"):
                if base is None:
                    base = FlrAnalysis(y, xs, flr_cfg.p_max, flr_cfg.em,
                                       derive_seed(seed, "FLR"), flr_cfg.n_boot)
                    base.boot_values
                an = FlrAnalysis(y, xs, flr_cfg.p_max, flr_cfg.em, derive_seed(seed, "FLR"),
                                 flr_cfg.n_boot, shared=base)
                res = an.select(flr_cfg.c_min, flr_cfg.c_max, flr_cfg.grid_size)
                p = res.p_raw if meth == "FLR" else res.p_cv
            elif meth == "PAD":
                p = pad(y, xs, cache=cache).p_value
            elif meth == "CPAD":
                p = cpad(y, xs, cache=cache).p_value
            elif meth == "PMAD":
                p = pmad(y, xs, config.pmad_subsets, derive_seed(seed, "PMAD"), config.n_perm).p_value
            else:
                p = adm(y, xs, config.n_perm, derive_seed(seed, "ADM")).p_value
            rows.append(ResultRow(spec.setting_id, replicate, meth, float(p)))
    return rows


def run_experiment(setting_ids: Sequence[str], methods: Sequence[str], replicates: int = 20,
                   N: int = 100, K: int = 54, root_seed: int = 0,
                   config: ExperimentConfig | None = None, progress=None):
    """Return ``(rows, summary)``; rows are ordered by setting, replicate, method.

    Each (block, replicate) is seeded independently of every other, so any
    subset of replicates reproduces the corresponding rows of a full run.
    """
    config = config or ExperimentConfig()
    methods = _validate_methods(methods)
    specs = builtin_settings(N, K, config.reading, config.setting3)
    unknown = [s for s in setting_ids if s not in specs]
    if unknown:
        raise ValueError(f"unknown settings {unknown}")
    if replicates < 0:
        raise ValueError("replicates must be >= 0")
    chosen = [specs[s] for s in setting_ids]
    blocks: dict[str, list[SettingSpec]] = {}
    for s in chosen:
        blocks.setdefault(s.block, []).append(s)
    rows: list[ResultRow] = []
    for block, bspecs in blocks.items():
        for r in range(replicates):
            rows.extend(run_block_replicate(bspecs, methods, r, derive_seed(root_seed, "block", block),
                                            config))
            if progress:
                progress(block, r)
    order = {s: i for i, s in enumerate(setting_ids)}
    morder = {m: i for i, m in enumerate(methods)}
    rows.sort(key=lambda r: (order[r.setting], r.replicate, morder[r.method]))
    rates, metrics = summarise(rows, specs, config.alpha)
    srates, smetrics = summarise(rows, specs, config.alpha, screen=True)
    return rows, ExperimentSummary(rates, metrics, srates, smetrics, config.alpha)


# ---------------------------------------------------------- asymptotic checks

def chisq_null_check(d: int = 2, n: int = 500, replicates: int = 500, seed: int = 0) -> float:
    """KS p-value of simulated ``-2 l`` against chi-square(d).

    Case and control are both standard normal samples of size ``n`` and all
    three fits are forced to order 1, where the pooled-vs-separate ratio has
    two degrees of freedom.
    """
    if replicates < 50:
        raise ValueError("replicates must be >= 50")
    if d < 1 or n < 2:
        raise ValueError("need d >= 1 and n >= 2")
    rng = np.random.default_rng(derive_seed(seed, "chisq", n))
    cfg = EMConfig()
    vals = np.empty(replicates)
    for i in range(replicates):
        y, x = rng.standard_normal(n), rng.standard_normal(n)
        l = fit_em(np.concatenate([y, x]), 1, cfg).loglik - fit_em(y, 1, cfg).loglik - fit_em(x, 1, cfg).loglik
        vals[i] = -2.0 * l
    return float(stats.kstest(vals, stats.chi2(d).cdf).pvalue)


def order_consistency_check(true_mixture: GaussianMixture, n_grid: Sequence[int], replicates: int = 50,
                            seed: int = 0, p_max: int = 9, config: EMConfig | None = None) -> dict[int, float]:
    """Fraction of replicates whose BIC order equals the true order, per sample size."""
    config = config or EMConfig()
    out = {}
    for n in n_grid:
        rng = np.random.default_rng(derive_seed(seed, "order", n))
        hits = 0
        for i in range(replicates):
            x = draw(true_mixture, n, rng)
            sel = select_order_bic(x, p_max, config.with_seed(derive_seed(seed, n, i)))
            hits += sel.best_order == true_mixture.order
        out[int(n)] = hits / replicates if replicates else float("nan")
    return out


def synthetic_study(setting_id: str, n_regions: int, abnormal_regions: Sequence[int] = (), N: int = 100,
                    K: int = 54, seed: int = 0, reading: str = "literal"):
    """Case and control band-power matrices built from a block's laws.

    Regions listed in ``abnormal_regions`` (1-based) draw the case from
    ``setting_id``'s case law.  Elsewhere the case follows the law of the
    last control, so H0 holds there.
    """
    from .spectrum import BandPowerMatrix

    specs = builtin_settings(N, K, reading)
    spec = specs[setting_id]
    abnormal = set(abnormal_regions)
    case = np.empty((n_regions, N))
    controls = np.empty((K, n_regions, N))
    for a in range(1, n_regions + 1):
        rng = np.random.default_rng(derive_seed(seed, "study", setting_id, a))
        for k, law in enumerate(spec.control_densities):
            controls[k, a - 1] = law.sample(N, rng)
        law = spec.case_density if a in abnormal else spec.control_densities[-1]
        case[a - 1] = law.sample(N, rng)
    return (BandPowerMatrix(case, "synthetic"),
            [BandPowerMatrix(controls[k], "synthetic") for k in range(K)])
