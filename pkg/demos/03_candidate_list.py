"""
From seeds to a short list
==========================

With most rows adversarial there is no single answer to recover; instead
independent seeds each propose a regressor, near-duplicates are merged by
single linkage, and a small clean validation set picks the winner.
"""
import numpy as np

from expander_ldr import PipelineConfig, SynthConfig, evaluate, gen_synthetic_split, run_list, select_best

train, test = gen_synthetic_split(SynthConfig(alpha=0.2, seed=3))
cfg = PipelineConfig(alpha=0.2, seeds=10)
out = run_list(train.X, train.y, cfg)

print(f"{len(out.candidates)} seeds -> {out.centers.shape[0]} centres")
for c in out.candidates:
    err = np.linalg.norm(c.ell_hat - train.w_star)
    print(f"  seed {c.seed_index}: rounds {c.rounds_used}, param error {err:.3f}")

# a radius > 0 merges candidates that agree up to that distance
merged = run_list(train.X, train.y, cfg.replace(delta_radius=1.0))
print(f"radius 1.0 -> {merged.centers.shape[0]} centres")

best = select_best(out, test.X, test.y)
print("selected:", evaluate(best, test))
