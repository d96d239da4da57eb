"""
One seed, round by round
========================

A single seed sketches the rows, aggregates bucket moments with median of
means, solves a ridge system, and then looks for buckets whose residual
covariance is too large along the top eigendirection.  The worst half is
dropped and the loop repeats until the spectrum looks like the inliers'.
"""
import numpy as np

from expander_ldr import PipelineConfig, SynthConfig, evaluate, gen_synthetic_split, ols_fit, run_seed

train, test = gen_synthetic_split(SynthConfig(n=5000, d=20, alpha=0.3, seed=1))
print(f"{train.X.shape[0]} rows, {int(train.inlier_mask.sum())} inliers")

cand = run_seed(train.X, train.y, PipelineConfig(alpha=0.3), seed_index=0)
print(f"{'round':>5} {'active':>7} {'lambda_max':>12} {'target':>10}")
for h in cand.history:
    print(f"{h['round']:5d} {h['active']:7d} {h['lambda_max']:12.3f} {h['target_var']:10.3f}")
print(f"prunes used: {cand.rounds_used}, buckets left: {cand.active_bucket_count}")

# compare against least squares on the same corrupted rows
for name, w in (("single seed", cand.ell_hat), ("ols", ols_fit(train.X, train.y).w_hat)):
    m = evaluate(w, test)
    print(f"{name:>11}: param error {m.param_error:.3f}, test mse {m.test_mse:.3f}")
