"""
A miniature contamination sweep
===============================

The experiment harness writes one CSV row per (grid value, seed, method) and
an aggregate table next to it.  This runs a cut-down version of the inlier
fraction sweep (2 seeds, smaller n) and prints the mean test error.
"""
import sys
import tempfile
from pathlib import Path

from expander_ldr.data import SynthConfig
from expander_ldr.experiments import ExperimentSpec, aggregate, run_experiment, summary_table, write_results

spec = ExperimentSpec("alpha_sweep", (0.4, 0.3, 0.2), seeds=(0, 1), synth=SynthConfig(n=3000),
                      methods=("ols", "huber", "ransac", "expanderL"))
rows = run_experiment(spec)
table = summary_table(aggregate(rows))

methods = spec.methods
print("alpha " + " ".join(f"{m:>10}" for m in methods))
for a, row in table.items():
    print(f"{a:>5} " + " ".join(f"{row[m]:10.3f}" for m in methods))

out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())
print("written:", *write_results(rows, out_dir / "mini_alpha.csv"))
