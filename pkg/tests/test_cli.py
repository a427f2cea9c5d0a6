import json
import math

import jsonschema
import numpy as np
import pytest
from referencing import Registry, Resource

from oksample import schemas
from oksample.cli import main
from oksample.simlab import synthetic_study
from oksample.spectrum import BandPowerMatrix, read_matrix_csv, write_matrix_csv


def validate(doc, name):
    registry = Registry().with_resources(
        (f"oksample/{n}.schema.json", Resource.from_contents(schemas.load(n))) for n in schemas.NAMES
    )
    jsonschema.Draft202012Validator(schemas.load(name), registry=registry).validate(doc)


def write_study(tmp_path, case, controls):
    write_matrix_csv(case, tmp_path / "case.csv")
    paths = []
    for k, c in enumerate(controls):
        p = tmp_path / f"ctrl{k:02d}.csv"
        write_matrix_csv(c, p)
        paths.append(str(p))
    return str(tmp_path / "case.csv"), paths


def control_args(paths):
    return [a for p in paths for a in ("--control", p)]


def test_usage_errors_exit_2(tmp_path, capsys):
    assert main([]) == 2
    assert main(["simulate", "--settings", "7.7", "--out", str(tmp_path)]) == 2
    assert main(["simulate", "--settings", "1.1", "--methods", "XYZ", "--out", str(tmp_path)]) == 2
    assert main(["nonsense"]) == 2
    assert "usage error" in capsys.readouterr().err


def test_bad_seed_env(tmp_path, monkeypatch):
    monkeypatch.setenv("OKSAMPLE_SEED", "abc")
    assert main(["simulate", "--settings", "1.1", "--methods", "PAD", "--reps", "0", "--out", str(tmp_path)]) == 2


def test_simulate_rows_determinism_and_schema(tmp_path):
    args = ["simulate", "--settings", "1.1", "--methods", "PAD", "--reps", "2", "--N", "40", "--K", "12",
            "--n-perm", "199", "--seed", "3"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    raw = (tmp_path / "a" / "raw.tsv").read_bytes()
    assert raw == (tmp_path / "b" / "raw.tsv").read_bytes()
    assert (tmp_path / "a" / "summary.json").read_bytes() == (tmp_path / "b" / "summary.json").read_bytes()
    lines = raw.decode().splitlines()
    assert lines[0].startswith("# ") and lines[1] == "setting\treplicate\tmethod\tp"
    assert len(lines[2:]) == 2
    validate(json.loads((tmp_path / "a" / "summary.json").read_text()), "summary")


def test_simulate_f1_recomputable_from_tsv(tmp_path):
    out = tmp_path / "s"
    assert main(["simulate", "--settings", "1.2,1.5", "--methods", "PAD", "--reps", "3", "--N", "40",
                 "--K", "12", "--n-perm", "199", "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    tp = fp = fn = 0
    for line in (out / "raw.tsv").read_text().splitlines()[2:]:
        sid, _, _, p = line.split("\t")
        claim, truth = float(p) <= 0.05, sid == "1.5"
        tp += claim and truth
        fp += claim and not truth
        fn += (not claim) and truth
    prec, rec = tp / (tp + fp), tp / (tp + fn)
    assert summary["metrics"]["1"]["PAD"]["f_scores"]["F1"] == pytest.approx(2 * prec * rec / (prec + rec))


def tone_epoch(path, J=200, fs=200.0, hz=10):
    t = np.arange(J)
    rows = [np.cos(2 * np.pi * hz * t / J), np.zeros(J)]
    path.write_text(f"# sample_rate={fs:g}\n" + "\n".join(",".join(repr(float(v)) for v in r) for r in rows) + "\n")


def test_spectrum_single_tone(tmp_path):
    ep = tmp_path / "epochs"
    ep.mkdir()
    tone_epoch(ep / "e01.csv")
    (tmp_path / "map.csv").write_text("source,region\n1,1\n2,2\n")
    out = tmp_path / "m.csv"
    assert main(["spectrum", "--epochs", str(ep), "--band", "alpha", "--region-map", str(tmp_path / "map.csv"),
                 "--out", str(out)]) == 0
    m = read_matrix_csv(out)
    assert m.values.shape == (2, 1) and m.band == "alpha"
    assert m.values[0, 0] == pytest.approx(math.log(100 / 5))
    assert m.metadata["command"] == "spectrum"


def test_spectrum_empty_dir_is_usage_error(tmp_path):
    (tmp_path / "e").mkdir()
    (tmp_path / "map.csv").write_text("1,1\n")
    assert main(["spectrum", "--epochs", str(tmp_path / "e"), "--band", "delta",
                 "--region-map", str(tmp_path / "map.csv"), "--out", str(tmp_path / "o.csv")]) == 2


def test_spectrum_output_feeds_test_command(tmp_path):
    rng = np.random.default_rng(0)
    (tmp_path / "map.csv").write_text("1,1\n2,2\n")
    outs = []
    for subj in range(3):
        d = tmp_path / f"s{subj}"
        d.mkdir()
        for e in range(20):
            sig = rng.normal(size=(2, 128))
            (d / f"e{e:02d}.csv").write_text("# sample_rate=128\n" + "\n".join(
                ",".join(map(repr, r.tolist())) for r in sig) + "\n")
        outs.append(str(tmp_path / f"s{subj}.csv"))
        assert main(["spectrum", "--epochs", str(d), "--band", "theta", "--region-map",
                     str(tmp_path / "map.csv"), "--out", outs[-1]]) == 0
    assert main(["test", "--case", outs[0], *control_args(outs[1:]), "--methods", "PAD", "--n-perm", "199",
                 "--band", "theta", "--out", str(tmp_path / "r")]) == 0
    validate(json.loads((tmp_path / "r" / "report.json").read_text()), "report")


def test_null_self_test_has_no_significant_region(tmp_path):
    case, controls = synthetic_study("1.5", 3, [], N=60, K=1, seed=1)
    case_path, _ = write_study(tmp_path, case, controls)
    assert main(["test", "--case", case_path, "--control", case_path, "--methods", "PAD",
                 "--out", str(tmp_path / "r")]) == 0
    report = json.loads((tmp_path / "r" / "report.json").read_text())
    assert not any(r["methods"]["PAD"]["significant"] for r in report["regions"])
    assert all("hc_approved" not in r["methods"]["PAD"] for r in report["regions"])


def test_shifted_region_flagged_and_approved(tmp_path):
    case, controls = synthetic_study("1.5", 3, [2], N=100, K=8, seed=2)
    case_path, ctrl = write_study(tmp_path, case, controls)
    manifest = {"case": "case.csv", "controls": [p.split("/")[-1] for p in ctrl], "methods": ["PAD"],
                "seed": 5, "band": "synthetic"}
    (tmp_path / "m.json").write_text(json.dumps(manifest))
    out = tmp_path / "r"
    assert main(["test", "--manifest", str(tmp_path / "m.json"), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    validate(report, "report")
    rec = report["regions"][1]["methods"]["PAD"]
    assert rec["significant"] and rec["hc_approved"] is True
    assert (out / rec["dendrogram"]).read_text().startswith("[oksample")
    for r in report["regions"]:
        for m in r["methods"].values():
            assert m["p_adjusted"] >= m["p_raw"]
    first = (out / "report.json").read_bytes()
    assert main(["test", "--manifest", str(tmp_path / "m.json"), "--out", str(tmp_path / "r2")]) == 0
    assert (tmp_path / "r2" / "report.json").read_bytes() == first


def test_test_command_input_errors(tmp_path, capsys):
    case, controls = synthetic_study("1.5", 2, [], N=30, K=2, seed=3)
    case_path, ctrl = write_study(tmp_path, case, controls)
    out = str(tmp_path / "r")
    assert main(["test", "--case", case_path, *control_args(ctrl), "--methods", "BOGUS", "--out", out]) == 2
    assert main(["test", "--case", case_path, "--out", out]) == 2
    assert main(["test", "--case", case_path, "--control", str(tmp_path / "missing.csv"), "--out", out]) == 1
    write_matrix_csv(BandPowerMatrix(np.zeros((3, 30)), "synthetic"), tmp_path / "wide.csv")
    assert main(["test", "--case", case_path, "--control", str(tmp_path / "wide.csv"), "--out", out]) == 1
    (tmp_path / "bad.json").write_text('{"case": "case.csv",\n "controls": [}')
    capsys.readouterr()
    assert main(["test", "--manifest", str(tmp_path / "bad.json"), "--out", out]) == 1
    assert "bad.json:2:" in capsys.readouterr().err


def test_cluster_two_leaves_and_far_case(tmp_path):
    case, controls = synthetic_study("1.5", 2, [1], N=80, K=1, seed=4)
    case_path, ctrl = write_study(tmp_path, case, controls)
    prefix = tmp_path / "c" / "region1"
    assert main(["cluster", "--case", case_path, *control_args(ctrl), "--region", "1", "--n-perm", "199",
                 "--out", str(prefix)]) == 0
    nwk = (tmp_path / "c" / "region1.nwk").read_text().strip()
    body = nwk.split("]", 1)[1]
    assert body.startswith("(1:") and ",2:" in body and body.endswith(");")
    doc = json.loads((tmp_path / "c" / "region1.json").read_text())
    validate(doc, "cluster")
    assert doc["hc_approved"] is True

    case, controls = synthetic_study("1.5", 1, [1], N=80, K=6, seed=5)
    case_path, ctrl = write_study(tmp_path, case, controls)
    assert main(["cluster", "--case", case_path, *control_args(ctrl), "--region", "1", "--n-perm", "199",
                 "--out", str(prefix)]) == 0
    assert json.loads((tmp_path / "c" / "region1.json").read_text())["hc_approved"] is True
    assert main(["cluster", "--case", case_path, *control_args(ctrl), "--region", "4",
                 "--out", str(prefix)]) == 2
