"""``oksample`` command line.

Subcommands: ``test``, ``simulate``, ``spectrum``, ``cluster``.
Exit status is 0 on success, 2 on usage errors and 1 on runtime failures.
The default seed comes from ``$OKSAMPLE_SEED`` (0 when unset).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .errors import OkSampleError
from .flr import FlrConfig
from .hetero import RULES, export_newick, hc_decision
from .simlab import METHODS, READINGS, ExperimentConfig, builtin_settings, run_experiment
from .spectrum import (
    BANDS,
    build_band_power_matrix,
    list_epoch_files,
    read_epoch_csv,
    read_region_map,
    write_matrix_csv,
)
from .study import (
    PROFILES,
    ManifestError,
    StudyManifest,
    hc_config_for,
    load_manifest,
    load_matrices,
    run_metadata,
    run_study,
)

SEED_ENV = "OKSAMPLE_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"${SEED_ENV} must be an integer, got {raw!r}") from None


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _add_study_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", help="JSON study manifest")
    p.add_argument("--case", help="case band-power CSV")
    p.add_argument("--control", action="append", default=[], help="control band-power CSV (repeatable)")
    p.add_argument("--band", help="expected band name")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--c-min", type=float)
    p.add_argument("--c-max", type=float)
    p.add_argument("--grid-size", type=int)
    p.add_argument("--p-max", type=int)
    p.add_argument("--n-perm", type=int)
    p.add_argument("--B", dest="B", type=int, help="bootstrap replicas per control")
    p.add_argument("--alpha", type=float, help="BH level for significance and HC (default 0.01)")
    p.add_argument("--profile", choices=PROFILES, help="FLR fitting profile (default desk)")
    p.add_argument("--pair-test", choices=("auto", "ad", "flr"))
    p.add_argument("--hc-rule", choices=RULES)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="oksample", description="One-vs-K sample tests for band-power data.")
    parser.add_argument("--version", action="version", version=f"oksample {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    t = sub.add_parser("test", help="test a case against controls region by region")
    _add_study_args(t)
    t.add_argument("--methods", type=_csv_list, help=f"comma list from {','.join(METHODS)}")
    t.add_argument("--out", required=True, help="output directory")

    s = sub.add_parser("simulate", help="run synthetic experiments")
    s.add_argument("--settings", type=_csv_list, required=True, help="e.g. 1.1,1.2")
    s.add_argument("--methods", type=_csv_list, default=list(METHODS))
    s.add_argument("--reps", type=int, default=20)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--N", type=int, default=100)
    s.add_argument("--K", type=int, default=54)
    s.add_argument("--reading", choices=READINGS, default="literal")
    s.add_argument("--profile", choices=PROFILES, default="desk")
    s.add_argument("--n-perm", type=int, default=999)
    s.add_argument("--out", required=True, help="output directory")

    sp = sub.add_parser("spectrum", help="band-power matrix from epoch CSV files")
    sp.add_argument("--epochs", required=True, help="directory of epoch CSV files")
    sp.add_argument("--band", required=True, choices=sorted(BANDS))
    sp.add_argument("--region-map", required=True, help="CSV of source,region")
    sp.add_argument("--regions", type=int, help="region count (default: largest index in the map)")
    sp.add_argument("--sample-rate", type=float)
    sp.add_argument("--power", action="store_true", help="average |F|^2 instead of |F|")
    sp.add_argument("--out", required=True, help="output CSV")

    c = sub.add_parser("cluster", help="dendrogram and HC verdict for one region")
    _add_study_args(c)
    c.add_argument("--region", type=int, required=True)
    c.add_argument("--method", default="PAD", help="method whose pair test is used with --pair-test auto")
    c.add_argument("--out", required=True, help="output prefix (writes PREFIX.nwk and PREFIX.json)")
    return parser


def _manifest_from_args(args) -> StudyManifest:
    if args.manifest:
        if args.case or args.control:
            raise UsageError("give either --manifest or --case/--control, not both")
        m = load_manifest(args.manifest)
    else:
        if not args.case or not args.control:
            raise UsageError("--case and at least one --control are required without --manifest")
        m = StudyManifest(args.case, list(args.control))
        m.seed = None
    overrides = {k: getattr(args, k) for k in
                 ("c_min", "c_max", "grid_size", "p_max", "n_perm", "B", "alpha", "profile", "pair_test", "hc_rule")
                 if getattr(args, k, None) is not None}
    m.config = replace(m.config, **overrides)
    if args.seed is not None:
        m.seed = args.seed
    elif m.seed is None:
        m.seed = _default_seed()
    if args.band:
        m.band = args.band
    if getattr(args, "methods", None):
        m.methods = args.methods
    try:
        m.config.flr(m.seed)
        return m.validate()
    except ManifestError as exc:
        raise UsageError(str(exc)) from None


def cmd_test(args) -> int:
    manifest = _manifest_from_args(args)
    report = run_study(manifest, args.out)
    n_sig = {m: sum(r["methods"][m]["significant"] for r in report["regions"]) for m in manifest.methods}
    print(json.dumps({"out": args.out, "significant_regions": n_sig}, sort_keys=True))
    return 0


def cmd_simulate(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    specs = builtin_settings(args.N, args.K, args.reading)
    bad = [s for s in args.settings if s not in specs]
    if bad:
        raise UsageError(f"unknown settings {bad}; known: {sorted(specs)}")
    methods = [m.upper() for m in args.methods]
    if any(m not in METHODS for m in methods):
        raise UsageError(f"unknown methods; choose from {','.join(METHODS)}")
    if args.reps < 0:
        raise UsageError("--reps must be >= 0")
    flr = FlrConfig.desk() if args.profile == "desk" else FlrConfig()
    config = ExperimentConfig(flr=flr, n_perm=args.n_perm, reading=args.reading)
    rows, summary = run_experiment(args.settings, methods, args.reps, args.N, args.K, seed, config)
    meta = run_metadata("simulate", seed, {
        "settings": args.settings, "methods": methods, "replicates": args.reps, "N": args.N, "K": args.K,
        "reading": args.reading, "profile": args.profile, "n_perm": args.n_perm,
    })
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "raw.tsv").open("w") as fh:
        fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        fh.write("setting\treplicate\tmethod\tp\n")
        for r in rows:
            fh.write(r.tsv() + "\n")
    doc = {"metadata": meta, "settings": {s: specs[s].to_dict() for s in args.settings}, **summary.to_dict()}
    (out / "summary.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(json.dumps({"out": str(out), "rows": len(rows)}))
    return 0


def cmd_spectrum(args) -> int:
    files = list_epoch_files(args.epochs) if Path(args.epochs).is_dir() else None
    if files is None:
        raise UsageError(f"--epochs {args.epochs} is not a directory")
    if not files:
        raise UsageError(f"no epoch CSV files in {args.epochs}")
    region_map = read_region_map(args.region_map)
    A = args.regions or int(region_map.max())
    epochs = [read_epoch_csv(f, args.sample_rate) for f in files]
    matrix = build_band_power_matrix(epochs, args.band, region_map, A, power=args.power)
    meta = run_metadata("spectrum", 0, {
        "epochs": [Path(f).name for f in files], "band": args.band, "regions": A,
        "sample_rate": epochs[0].sample_rate, "aggregate": "power" if args.power else "magnitude",
    })
    write_matrix_csv(matrix, args.out, meta)
    print(json.dumps({"out": args.out, "regions": matrix.n_regions, "epochs": matrix.n_epochs}))
    return 0


def cmd_cluster(args) -> int:
    manifest = _manifest_from_args(args)
    method = args.method.upper()
    if method not in METHODS:
        raise UsageError(f"unknown method {args.method!r}")
    case, controls = load_matrices(manifest)
    if not 1 <= args.region <= case.n_regions:
        raise UsageError(f"--region must lie in 1..{case.n_regions}")
    a = args.region
    subjects = [c.values[a - 1] for c in controls] + [case.values[a - 1]]
    hc = hc_config_for(method, manifest.config, manifest.seed)
    dec = hc_decision(a, subjects, hc)
    meta = run_metadata("cluster", manifest.seed, {
        "case": manifest.case_path, "controls": manifest.control_paths, "region": a, "method": method,
        "pair_test": hc.pair_test, "rule": hc.rule, "n_perm": hc.n_perm,
    })
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    note = f"oksample {__version__} seed={manifest.seed} region={a} case=leaf {len(subjects)}"
    Path(str(prefix) + ".nwk").write_text(export_newick(dec.dendrogram, comment=note) + "\n")
    doc = {"metadata": meta, "region": a, "case_leaf": len(subjects), "hc_approved": dec.approved,
           "rule": hc.rule, "dendrogram": dec.dendrogram.to_dict(),
           "similarity": [list(map(float, row)) for row in dec.similarity.values]}
    Path(str(prefix) + ".json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(json.dumps({"region": a, "hc_approved": dec.approved}))
    return 0


COMMANDS = {"test": cmd_test, "simulate": cmd_simulate, "spectrum": cmd_spectrum, "cluster": cmd_cluster}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (OkSampleError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
