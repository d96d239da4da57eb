"""Median-of-means and geometric-median aggregation of bucket statistics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, List, Mapping, Optional, Sequence

import numpy as np

from . import _rng
from .errors import AggregationError, ParameterError
from .sketch import BucketStats

MODES = ("mom", "geometric")


@dataclass(frozen=True)
class BlockPartition:
    blocks: List[np.ndarray]
    block_size: int

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)


@dataclass(frozen=True)
class RobustMoments:
    sigma_hat: np.ndarray
    g_hat: np.ndarray
    block_count: int


def partition_blocks(active: Sequence, block_size: int, rng_label: Sequence[int] = (0, 0, 0)) -> BlockPartition:
    """Randomly permute ``active`` and cut it into chunks of ``block_size``.

    Blocks hold the *items* of ``active`` (not positions); the last block
    carries the remainder.
    """
    if block_size < 1:
        raise ParameterError("block_size must be >= 1")
    items = np.asarray(active)
    if items.size == 0:
        raise AggregationError("cannot partition an empty active set")
    rng = _rng.make_rng(_rng.PARTITION, *rng_label)
    perm = items[rng.permutation(items.shape[0])]
    blocks = [perm[i:i + block_size] for i in range(0, perm.shape[0], block_size)]
    return BlockPartition(blocks, int(block_size))


def block_means(values: np.ndarray, blocks: Sequence[np.ndarray]) -> np.ndarray:
    """Unweighted mean of ``values[idx]`` over each block of row positions."""
    values = np.asarray(values, dtype=np.float64)
    sizes = np.array([len(b) for b in blocks])
    order = np.concatenate(blocks)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    sums = np.add.reduceat(values[order], starts, axis=0)
    return sums / sizes.reshape((-1,) + (1,) * (values.ndim - 1))


def mom_median(block_means: Sequence[np.ndarray], mode: str = "vector") -> np.ndarray:
    """Coordinate-wise median of block means.

    Even counts take the midpoint of the two middle order statistics.  In
    ``mode="matrix"`` the result is symmetrised as ``(A + A^T) / 2``.
    """
    if mode not in ("vector", "matrix"):
        raise ParameterError(f"unknown mode {mode!r}")
    try:
        stack = np.asarray(block_means, dtype=np.float64)
    except ValueError as exc:
        raise ParameterError("block means must share one shape") from exc
    if stack.dtype == object or stack.ndim == 0 or stack.shape[0] == 0:
        raise ParameterError("need at least one block mean of a common shape")
    med = np.median(stack, axis=0)
    if mode == "matrix":
        if med.ndim != 2 or med.shape[0] != med.shape[1]:
            raise ParameterError("matrix mode requires square block means")
        med = 0.5 * (med + med.T)
    return med


def geometric_median(points: Sequence[np.ndarray], tol: float = 1e-9, max_iter: int = 200,
                     return_history: bool = False):
    """Weiszfeld iteration for ``argmin_q sum_i ||q - p_i||``.

    Uses the Vardi-Zhang modification when an iterate lands on a data point.
    Stops once a step is shorter than ``tol`` times the point spread, and
    always returns the best iterate seen.
    """
    P = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if P.shape[0] == 0:
        raise ParameterError("geometric median of an empty set")
    if P.shape[0] == 1:
        return (P[0].copy(), [0.0]) if return_history else P[0].copy()

    def objective(q):
        return float(np.linalg.norm(P - q, axis=1).sum())

    spread = float(np.max(np.linalg.norm(P - P.mean(axis=0), axis=1)))
    if spread == 0.0:
        return (P[0].copy(), [0.0]) if return_history else P[0].copy()
    eps = tol * spread

    q = np.median(P, axis=0)
    best, best_obj = q, objective(q)
    history = [best_obj]
    for _ in range(max_iter):
        dist = np.linalg.norm(P - q, axis=1)
        at_point = dist <= eps
        w = 1.0 / np.where(at_point, 1.0, dist)
        w[at_point] = 0.0
        if not w.any():  # every point sits on the iterate
            break
        T = (w[:, None] * P).sum(axis=0) / w.sum()
        if at_point.any():
            # Vardi-Zhang: blend towards the coincident point by the pull of the rest
            eta = float(at_point.sum())
            R = np.linalg.norm((w[:, None] * (P - q)).sum(axis=0))
            if R <= eta:
                q_new = q
            else:
                q_new = (1.0 - eta / R) * T + min(1.0, eta / R) * q
        else:
            q_new = T
        step = float(np.linalg.norm(q_new - q))
        q = q_new
        obj = objective(q)
        if obj <= best_obj:
            best, best_obj = q, obj
        history.append(obj)
        if step < eps:
            break
    return (best.copy(), history) if return_history else best.copy()


def aggregate_blocks(values: np.ndarray, partition_positions: Sequence[np.ndarray], mode: str = "mom") -> np.ndarray:
    """Block-average ``values`` (first axis = items) then reduce robustly.

    Matrices are flattened for the geometric mode and symmetrised afterwards.
    """
    if mode not in MODES:
        raise ParameterError(f"aggregation mode must be one of {MODES}")
    means = block_means(values, partition_positions)
    is_matrix = means.ndim == 3
    if mode == "mom":
        return mom_median(means, "matrix" if is_matrix else "vector")
    flat = means.reshape(means.shape[0], -1)
    out = geometric_median(flat).reshape(means.shape[1:])
    if is_matrix:
        out = 0.5 * (out + out.T)
    return out


def robust_aggregate(bucket_stats: Mapping[Hashable, BucketStats], block_size: int = 16, mode: str = "mom",
                     rng_label: Sequence[int] = (0, 0, 0), keys: Optional[Sequence[Hashable]] = None) -> RobustMoments:
    """Reduce per-bucket ``(H, g)`` to global ``(sigma_hat, g_hat)``.

    Buckets with ``count == 0`` are skipped.  The partition is drawn over the
    sorted non-empty keys so the result does not depend on mapping order.
    """
    usable = [k for k in (sorted(bucket_stats) if keys is None else keys) if bucket_stats[k].count > 0]
    if not usable:
        raise AggregationError("no non-empty bucket to aggregate")
    H = np.stack([bucket_stats[k].H for k in usable])
    g = np.stack([bucket_stats[k].g for k in usable])
    part = partition_blocks(np.arange(len(usable)), block_size, rng_label)
    return RobustMoments(
        sigma_hat=aggregate_blocks(H, part.blocks, mode),
        g_hat=aggregate_blocks(g, part.blocks, mode),
        block_count=part.n_blocks,
    )
