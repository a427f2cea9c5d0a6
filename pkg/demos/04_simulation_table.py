"""A small version of the synthetic benchmark.

Setting block 1 mixes two control laws (10 and 44 controls) and tests five
cases; block 2 uses lognormal cases.  For each method we report the fraction
of replicates with p <= 0.05, then precision, recall and F scores with the
sub-settings of a block pooled.

The default here is 5 replicates so the script finishes in a few minutes.
Pass a replicate count to run more, e.g. ``python demos/04_simulation_table.py 20``.
``ExperimentConfig(reading="intended")`` switches to the alternative reading
in which cases 1.1 and 2.1 are null.  The same run is available as ``oksample simulate --settings 1.1,...,1.5 --reps 20 --out DIR``.
"""
import sys
import time

from oksample.simlab import METHODS, ExperimentConfig, run_experiment

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 5
settings = ["1.1", "1.2", "1.3", "1.4", "1.5", "2.1", "2.2", "2.3"]

t0 = time.perf_counter()
rows, summary = run_experiment(settings, METHODS, reps, N=100, K=54, root_seed=2024,
                               config=ExperimentConfig(),
                               progress=lambda block, r: print(f"  block {block} replicate {r + 1}/{reps}",
                                                               file=sys.stderr))
print(f"\n{len(rows)} p-values in {time.perf_counter() - t0:.0f} s\n")

print("setting " + "".join(f"{m:>7}" for m in METHODS))
for sid in settings:
    print(f"{sid:<8}" + "".join(f"{summary.rejection_rates[sid][m]:7.2f}" for m in METHODS))

for block, by_method in summary.metrics.items():
    print(f"\nblock {block}")
    for label in ("precision", "recall", "F0.5", "F1", "F2"):
        cells = []
        for m in METHODS:
            d = by_method[m].to_dict()
            v = d["f_scores"][label] if label.startswith("F") else d[label]
            cells.append("      -" if v is None else f"{v:7.2f}")
        print(f"{label:<10}" + "".join(cells))
