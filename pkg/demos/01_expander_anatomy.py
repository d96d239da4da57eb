"""
Anatomy of a signed expander sketch
===================================

Each row of the data picks ``degree`` distinct buckets at random and a sign
per edge.  Small row sets almost never collide, which is what lets a bucket
hold a handful of rows with at most a few adversarial ones.
"""
import numpy as np

from expander_ldr import audit_expansion, sample_expander, subset_diagnostics

# a graph with 5000 rows hashed into 1000 buckets, two edges per row
g = sample_expander(5000, 1000, 2, rng_label=(0, 0, 0))
print(g)
print("first rows ->", g.adjacency[:3].tolist(), "signs", g.signs[:3].tolist())

# bucket loads concentrate around n * degree / B = 10
loads = np.bincount(g.adjacency.ravel(), minlength=g.n_buckets)
print(f"bucket load: mean {loads.mean():.1f}, min {loads.min()}, max {loads.max()}")

# a small subset: how many buckets does it touch, and how many only once?
X = [4, 17, 256, 999, 4000]
dg = subset_diagnostics(g, X)
print(f"|X| = {len(X)}: {dg.neighbor_count} neighbours, "
      f"{dg.unique_neighbor_buckets.size} unique, collision excess {dg.collision_excess}")

# empirical expansion loss over random subsets of size <= 50
for k in (5, 20, 50):
    eps = audit_expansion(g, k, trials=300, rng_label=(0, 0, k))
    print(f"max set size {k:3d}: eps_hat = {eps:.3f}")
