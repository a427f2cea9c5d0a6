"""Region-by-region one-vs-K study: methods, BH adjustment, heterogeneity check."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from ._seeding import derive_seed
from .adfamily import PairCache, adm, cpad, pad, pmad
from .atlas import region_name
from .correction import bh_adjust
from .errors import ShapeMismatch
from .flr import FlrAnalysis, FlrConfig, digest
from .hetero import HcConfig, export_newick, hc_decision
from .simlab import METHODS
from .spectrum import BandPowerMatrix, read_matrix_csv

PROFILES = ("desk", "full")


class ManifestError(ValueError):
    """Malformed or inconsistent study manifest."""


@dataclass
class StudyConfig:
    c_min: float = 0.5
    c_max: float = 0.999
    grid_size: int = 50
    p_max: int | None = None  # None: profile default
    n_perm: int = 999
    B: int = 1
    alpha: float = 0.01
    profile: str = "desk"
    pair_test: str = "auto"
    hc_rule: str = "last-merge"

    def flr(self, seed: int) -> FlrConfig:
        if self.profile not in PROFILES:
            raise ManifestError(f"profile must be one of {PROFILES}")
        base = FlrConfig.desk() if self.profile == "desk" else FlrConfig()
        return FlrConfig(
            p_max=self.p_max or base.p_max, em=base.em, c_min=self.c_min, c_max=self.c_max,
            grid_size=self.grid_size, n_boot=self.B, seed=seed,
        )


@dataclass
class StudyManifest:
    case_path: str
    control_paths: list
    band: str | None = None
    methods: list = field(default_factory=lambda: ["FLR", "PAD"])
    seed: int = 0
    config: StudyConfig = field(default_factory=StudyConfig)

    def validate(self) -> "StudyManifest":
        if not self.control_paths:
            raise ManifestError("at least one control file is required")
        self.methods = [m.upper() for m in self.methods]
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ManifestError(f"unknown methods {bad}; choose from {list(METHODS)}")
        for p in [self.case_path, *self.control_paths]:
            if not Path(p).is_file():
                raise FileNotFoundError(f"no such file: {p}")
        return self


_CONFIG_KEYS = {f for f in StudyConfig.__dataclass_fields__}


def load_manifest(path) -> StudyManifest:
    """Read a JSON manifest; relative paths are taken relative to the manifest."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}:{exc.lineno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ManifestError(f"{path}: top level must be an object")
    base = path.parent

    def resolve(p):
        q = Path(p)
        return str(q if q.is_absolute() else base / q)

    try:
        cfg = raw.get("config", {}) or {}
        unknown = set(cfg) - _CONFIG_KEYS
        if unknown:
            raise ManifestError(f"{path}: unknown config keys {sorted(unknown)}")
        return StudyManifest(
            case_path=resolve(raw["case"]),
            control_paths=[resolve(p) for p in raw["controls"]],
            band=raw.get("band"),
            methods=list(raw.get("methods", ["FLR", "PAD"])),
            seed=int(raw.get("seed", 0)),
            config=StudyConfig(**cfg),
        ).validate()
    except KeyError as exc:
        raise ManifestError(f"{path}: missing key {exc.args[0]!r}") from None


def load_matrices(manifest: StudyManifest) -> tuple[BandPowerMatrix, list[BandPowerMatrix]]:
    case = read_matrix_csv(manifest.case_path)
    controls = [read_matrix_csv(p) for p in manifest.control_paths]
    for p, m in zip(manifest.control_paths, controls):
        if m.n_regions != case.n_regions:
            raise ShapeMismatch(f"{p}: {m.n_regions} regions, case has {case.n_regions}")
    if manifest.band:
        for p, m in zip([manifest.case_path, *manifest.control_paths], [case, *controls]):
            if m.band and m.band != manifest.band:
                raise ManifestError(f"{p}: band {m.band!r} does not match manifest band {manifest.band!r}")
    return case, controls


def region_pvalue(method: str, y: np.ndarray, xs: list[np.ndarray], seed: int, config: StudyConfig,
                  cache: PairCache) -> float:
    if method in ("FLR", "CFLR"):
        fc = config.flr(seed)
        an = FlrAnalysis(y, xs, fc.p_max, fc.em, derive_seed(seed, "FLR", digest(y)), fc.n_boot)
        res = an.select(fc.c_min, fc.c_max, fc.grid_size)
        return res.p_raw if method == "FLR" else res.p_cv
    if method == "PAD":
        return pad(y, xs, cache=cache).p_value
    if method == "CPAD":
        return cpad(y, xs, cache=cache).p_value
    if method == "PMAD":
        return pmad(y, xs, seed=derive_seed(seed, "PMAD"), n_perm=config.n_perm).p_value
    return adm(y, xs, config.n_perm, derive_seed(seed, "ADM")).p_value


def hc_config_for(method: str, config: StudyConfig, seed: int) -> HcConfig:
    test = config.pair_test
    if test == "auto":
        test = "flr" if method in ("FLR", "CFLR") else "ad"
    p_max = config.p_max or config.flr(seed).p_max
    return HcConfig(config.alpha, test, config.hc_rule, config.n_perm, seed, p_max)


def run_study(manifest: StudyManifest, out_dir=None, command: str = "test") -> dict:
    """Run every method on every region; write ``report.json`` and Newick sidecars if ``out_dir``."""
    case, controls = load_matrices(manifest)
    cfg = manifest.config
    seed = manifest.seed
    A = case.n_regions
    cache = PairCache(cfg.n_perm, derive_seed(seed, "AD"))
    subjects = {a: [c.values[a - 1] for c in controls] + [case.values[a - 1]] for a in range(1, A + 1)}
    per_method = {}
    sidecars: dict[str, str] = {}
    for method in manifest.methods:
        raw = np.array([
            region_pvalue(method, case.values[a - 1], [c.values[a - 1] for c in controls], seed, cfg, cache)
            for a in range(1, A + 1)
        ])
        adj = bh_adjust(raw, cfg.alpha)
        hc = {}
        for a in np.flatnonzero(adj.rejected) + 1:
            dec = hc_decision(int(a), subjects[int(a)], hc_config_for(method, cfg, seed))
            name = f"region-{int(a):02d}-{method}.nwk"
            hc[int(a)] = (dec.approved, name)
            note = f"oksample {__version__} seed={seed} region={int(a)} method={method} case=leaf {len(controls) + 1}"
            sidecars[name] = export_newick(dec.dendrogram, comment=note) + "\n"
        per_method[method] = (raw, adj, hc)

    regions = []
    for a in range(1, A + 1):
        entry = {"region": a, "name": region_name(a), "methods": {}}
        for method, (raw, adj, hc) in per_method.items():
            rec = {"p_raw": float(raw[a - 1]), "p_adjusted": float(adj.adjusted[a - 1]),
                   "significant": bool(adj.rejected[a - 1])}
            if a in hc:
                rec["hc_approved"] = hc[a][0]
                rec["dendrogram"] = hc[a][1]
            entry["methods"][method] = rec
        regions.append(entry)
    report = {
        "metadata": run_metadata(command, seed, {
            "case": manifest.case_path, "controls": manifest.control_paths, "band": manifest.band or case.band,
            "methods": manifest.methods, **asdict(cfg),
        }),
        "n_regions": A,
        "n_controls": len(controls),
        "regions": regions,
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        for name, text in sidecars.items():
            (out / name).write_text(text)
    return report


def run_metadata(command: str, seed: int, config: dict) -> dict:
    """Provenance block embedded in every output file (no clocks or hostnames, so reruns are byte-identical)."""
    return {"tool": "oksample", "version": __version__, "command": command, "seed": int(seed),
            "config": config}
