"""Expander-sketched list-decodable regression.

One *seed* of the estimator:

1. sample ``r`` signed expanders and bucket the rows;
2. compute per-bucket normal-equation moments;
3. median-of-means them into ``(sigma_hat, g_hat)`` and solve the ridge system;
4. aggregate per-bucket residual matrices, take the top eigenpair and, while
   its value exceeds ``(1 + eta)`` times a quantile of the bucket scores
   along the eigenvector (see :func:`target_level`), prune the top ``rho``
   fraction of buckets by that score and go back to 3 (at most ``T`` prunes).

``run_list`` repeats this for ``R`` independently keyed seeds and clusters the
candidates by single linkage.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from .errors import (AggregationError, DegenerateStateError, IndefiniteMomentsError,
                     ParameterError)
from .expander import sample_expander
from .numkit import ridge_solve, single_linkage_clusters, top_eigenpair
from .robust_agg import MODES, aggregate_blocks, partition_blocks
from .sketch import BucketAssignment, all_bucket_moments, assign_buckets, residual_matrices, row_outer

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    """Estimator hyperparameters; defaults are the synthetic-experiment setting."""

    alpha: float = 0.3
    n_buckets: int = 1000
    repetitions: int = 8
    degree: int = 2
    filter_rounds: int = 7
    seeds: int = 10
    block_size: int = 16
    lam: float = 1e-3
    eta: float = 0.10
    rho: float = 0.50
    delta_radius: float = 0.0
    aggregation_mode: str = "mom"
    master_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ParameterError("alpha must lie in (0, 1]")
        for name in ("n_buckets", "repetitions", "degree", "seeds", "block_size"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be >= 1")
        if self.filter_rounds < 0:
            raise ParameterError("filter_rounds must be >= 0")
        if self.degree > self.n_buckets:
            raise ParameterError("degree cannot exceed n_buckets")
        if self.lam < 0 or self.eta <= 0 or self.delta_radius < 0:
            raise ParameterError("need lam >= 0, eta > 0, delta_radius >= 0")
        if not 0.0 < self.rho < 1.0:
            raise ParameterError("rho must lie in (0, 1)")
        if self.aggregation_mode not in MODES:
            raise ParameterError(f"aggregation_mode must be one of {MODES}")
        if self.master_seed < 0:
            raise ParameterError("master_seed must be non-negative")

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class Candidate:
    ell_hat: np.ndarray
    seed_index: int
    rounds_used: int
    final_top_eigenvalue: float
    active_bucket_count: int
    history: List[Dict[str, float]] = field(default_factory=list, repr=False)


@dataclass(frozen=True)
class CandidateList:
    centers: np.ndarray
    members: np.ndarray
    candidates: List[Candidate]

    def __len__(self) -> int:
        return self.centers.shape[0]


class _Design:
    """Per-dataset caches shared by every seed."""

    def __init__(self, X: np.ndarray, y: np.ndarray):
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        self.y = np.ascontiguousarray(y, dtype=np.float64)
        if self.X.ndim != 2 or self.y.shape != (self.X.shape[0],):
            raise ParameterError(f"inconsistent shapes X={self.X.shape}, y={self.y.shape}")
        if self.X.shape[0] < self.X.shape[1]:
            raise ParameterError("need at least as many rows as columns")
        self.outer = row_outer(self.X)


def sketch_seed(X: np.ndarray, y: np.ndarray, cfg: PipelineConfig, seed_index: int) -> BucketAssignment:
    """Sample the ``r`` graphs of one seed and bucket the rows."""
    n = X.shape[0]
    graphs = [sample_expander(n, cfg.n_buckets, cfg.degree, (cfg.master_seed, seed_index, t))
              for t in range(cfg.repetitions)]
    return assign_buckets(X, y, graphs)


def target_level(alpha: float, mean_bucket_size: float = 1.0) -> float:
    """Score quantile used as the inlier benchmark.

    ``alpha ** m`` is the expected share of outlier-free buckets when each
    bucket draws ``m`` rows at random.  The level never drops below the
    median, so for ``alpha <= 1/2`` it is always the median; at ``alpha = 1``
    it is the largest score and clean data stops the filter at once.
    """
    if not 0.0 < alpha <= 1.0 or mean_bucket_size <= 0:
        raise ParameterError("need alpha in (0, 1] and a positive mean bucket size")
    return max(0.5, float(alpha) ** float(mean_bucket_size))


def target_variance(bucket_residual_matrices, v: np.ndarray, level: float = 0.5) -> float:
    """Quantile (default: median) over buckets of the Rayleigh score ``v^T C_b v``."""
    mats = np.asarray(bucket_residual_matrices, dtype=np.float64)
    if mats.ndim != 3 or mats.shape[0] == 0:
        raise ParameterError("need a non-empty stack of residual matrices")
    if not 0.0 < level <= 1.0:
        raise ParameterError("level must lie in (0, 1]")
    return _score_quantile(np.einsum("kij,i,j->k", mats, v, v), level)


def _score_quantile(scores: np.ndarray, level: float) -> float:
    return float(np.median(scores) if level == 0.5 else np.quantile(scores, level))


def _solve(sigma_hat, g_hat, lam, n):
    try:
        return ridge_solve(sigma_hat, g_hat, lam)
    except IndefiniteMomentsError:
        bumped = max(lam, float(np.linalg.norm(sigma_hat)) / math.sqrt(n))
        log.debug("indefinite moments, retrying with lambda=%g", bumped)
        return ridge_solve(sigma_hat, g_hat, bumped)


def run_seed(X: np.ndarray, y: np.ndarray, cfg: PipelineConfig, seed_index: int,
             _design: Optional[_Design] = None) -> Candidate:
    """Run the sketch / aggregate / filter loop for one seed."""
    D = _design if _design is not None else _Design(X, y)
    n = D.X.shape[0]
    assignment = sketch_seed(D.X, D.y, cfg, seed_index)
    H, g, counts = all_bucket_moments(D.X, D.y, assignment, outer=D.outer)
    P = assignment.indicator()
    active = np.flatnonzero(counts > 0)
    if active.size == 0:
        raise AggregationError("every bucket is empty")

    level = target_level(cfg.alpha, n * cfg.degree / cfg.n_buckets)
    history: List[Dict[str, float]] = []
    lam_top = float("nan")
    prunes = 0
    ell = None
    for tau in range(cfg.filter_rounds + 1):
        blocks = partition_blocks(np.arange(active.size), cfg.block_size,
                                  (cfg.master_seed, seed_index, tau)).blocks
        sigma_hat = aggregate_blocks(H[active], blocks, cfg.aggregation_mode)
        g_hat = aggregate_blocks(g[active], blocks, cfg.aggregation_mode)
        ell = _solve(sigma_hat, g_hat, cfg.lam, n)
        if tau == cfg.filter_rounds:
            break
        C = residual_matrices(D.X, D.y, assignment, ell, active, outer=D.outer, indicator=P)
        C_hat = aggregate_blocks(C, blocks, cfg.aggregation_mode)
        top = top_eigenpair(C_hat, rng_label=(cfg.master_seed, seed_index, tau))
        lam_top = top.value
        scores = np.einsum("kij,i,j->k", C, top.vector, top.vector)
        target = _score_quantile(scores, level)
        history.append({"round": tau, "active": int(active.size), "lambda_max": lam_top, "target_var": target})
        if lam_top <= (1.0 + cfg.eta) * target:
            break
        n_drop = math.ceil(cfg.rho * active.size)
        if n_drop >= active.size:
            raise DegenerateStateError("pruning would remove every active bucket")
        order = np.lexsort((active, -scores))  # highest score first, ties by key
        active = np.sort(active[order[n_drop:]])
        prunes += 1
    return Candidate(ell, seed_index, prunes, lam_top, int(active.size), history)


def run_list(X: np.ndarray, y: np.ndarray, cfg: PipelineConfig) -> CandidateList:
    """Run ``cfg.seeds`` independent seeds and cluster their candidates."""
    D = _Design(X, y)
    candidates = []
    for s in range(1, cfg.seeds + 1):
        try:
            candidates.append(run_seed(D.X, D.y, cfg, s, _design=D))
        except (DegenerateStateError, IndefiniteMomentsError, AggregationError) as exc:
            log.warning("seed %d failed: %s", s, exc)
    if not candidates:
        raise DegenerateStateError("every seed failed")
    clusters = single_linkage_clusters(np.stack([c.ell_hat for c in candidates]), cfg.delta_radius)
    return CandidateList(clusters.centers, clusters.labels, candidates)


def select_best(candidates: CandidateList, X_eval: np.ndarray, y_eval: np.ndarray) -> np.ndarray:
    """List member with the smallest mean squared prediction error on clean data."""
    centers = np.atleast_2d(candidates.centers if isinstance(candidates, CandidateList) else candidates)
    if centers.shape[0] == 0 or centers.size == 0:
        raise ParameterError("empty candidate list")
    mse = np.mean((np.asarray(X_eval) @ centers.T - np.asarray(y_eval)[:, None]) ** 2, axis=0)
    return centers[int(np.argmin(mse))].copy()


def candidate_list_to_dict(cfg: PipelineConfig, result: CandidateList) -> Dict[str, Any]:
    """JSON-ready record: config echo, candidates with diagnostics, cluster centers."""
    return {
        "config": dataclasses.asdict(cfg),
        "candidates": [
            {
                "seed_index": c.seed_index,
                "ell_hat": c.ell_hat.tolist(),
                "rounds_used": c.rounds_used,
                "final_top_eigenvalue": (c.final_top_eigenvalue
                                         if math.isfinite(c.final_top_eigenvalue) else None),
                "active_bucket_count": c.active_bucket_count,
                "cluster": int(m),
            }
            for c, m in zip(result.candidates, result.members)
        ],
        "centers": result.centers.tolist(),
    }
