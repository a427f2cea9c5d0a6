"""From raw epochs to a per-region report, through the command line.

We fabricate source time series for one case and six controls: four regions,
two sources each, 30 epochs of 1 s at 256 Hz.  In region 3 the case carries
an extra 10 Hz rhythm with a subject-specific amplitude.  The steps are

1. ``oksample spectrum``  epochs -> log alpha band-power matrix per subject
2. ``oksample test``      per-region PAD p-values, BH adjustment, HC check
3. ``oksample cluster``   the dendrogram behind one region's verdict

Outputs go to a temporary directory that is printed at the end.

Run:  python demos/03_epochs_to_report.py
"""
import json
import tempfile
from pathlib import Path

import numpy as np

from oksample.cli import main

fs, J, n_epochs = 256, 256, 30
t = np.arange(J) / fs
region_of_source = [1, 1, 2, 2, 3, 3, 4, 4]
rng = np.random.default_rng(2024)
root = Path(tempfile.mkdtemp(prefix="oksample-demo-"))
(root / "regions.csv").write_text("source,region\n" + "".join(f"{s},{r}\n" for s, r in
                                                               enumerate(region_of_source, 1)))

subjects = ["case"] + [f"control{k}" for k in range(1, 7)]
for name in subjects:
    d = root / "epochs" / name
    d.mkdir(parents=True)
    alpha_amp = rng.uniform(0.9, 1.1)  # subject-level alpha strength
    for e in range(n_epochs):
        x = rng.normal(size=(8, J))
        x += alpha_amp * np.sin(2 * np.pi * 10 * t + rng.uniform(0, 2 * np.pi))
        if name == "case":
            x[4:6] += 3.0 * np.sin(2 * np.pi * 10 * t + rng.uniform(0, 2 * np.pi))
        body = "\n".join(",".join(f"{v:.6f}" for v in row) for row in x)
        (d / f"epoch{e:03d}.csv").write_text(f"# sample_rate={fs}\n{body}\n")
    rc = main(["spectrum", "--epochs", str(d), "--band", "alpha",
               "--region-map", str(root / "regions.csv"), "--out", str(root / f"{name}.csv")])
    assert rc == 0

manifest = {"case": "case.csv", "controls": [f"{s}.csv" for s in subjects[1:]],
            "band": "alpha", "methods": ["PAD", "FLR"], "seed": 1}
(root / "study.json").write_text(json.dumps(manifest, indent=2))
assert main(["test", "--manifest", str(root / "study.json"), "--out", str(root / "report")]) == 0

report = json.loads((root / "report" / "report.json").read_text())
print(f"\n{'region':<38} {'PAD raw':>8} {'PAD adj':>8} {'HC':>6}   {'FLR raw':>8} {'FLR adj':>8} {'HC':>6}")
for r in report["regions"]:
    cells = []
    for m in ("PAD", "FLR"):
        rec = r["methods"][m]
        cells.append(f"{rec['p_raw']:8.3f} {rec['p_adjusted']:8.3f} {str(rec.get('hc_approved', '-')):>6}")
    print(f"{r['region']:>2} {r['name']:<35} " + "   ".join(cells))

assert main(["cluster", "--manifest", str(root / "study.json"), "--region", "3",
             "--out", str(root / "region3")]) == 0
print("\nregion 3 tree:", (root / "region3.nwk").read_text().strip())
print("files written under", root)
print("""
Only region 3 is abnormal by construction.  With six controls the FLR p-value
moves in steps of 1/6 and reaches 0 as soon as the case is further from every
control than the chosen threshold, so FLR can flag ordinary regions in small
groups; the clustering check is what keeps such regions out.""")
