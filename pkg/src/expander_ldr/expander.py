"""Random signed left-regular bipartite graphs and their combinatorial diagnostics.

Each left vertex (a data row) picks ``degree`` distinct right vertices
(buckets) uniformly at random and every edge carries an independent
Rademacher sign.  The diagnostics below are exact counts on a sampled graph:
neighbourhoods, unique neighbours, collisions, loads and an empirical
estimate of the lossless-expansion parameter.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, List, Sequence

import numpy as np

from . import _rng
from .errors import ParameterError


@dataclass(frozen=True)
class ExpanderSketch:
    """One repetition's signed bipartite graph.

    Attributes
    ----------
    n_left : int
        Number of left vertices (data rows).
    n_buckets : int
        Number of right vertices ``B``.
    degree : int
        Left degree ``d_L``.
    adjacency : ndarray of shape (n_left, degree), int64
        ``adjacency[i]`` lists the distinct buckets of row ``i`` in draw order.
    signs : ndarray of shape (n_left, degree), int8
        Edge signs in {-1, +1}, aligned with ``adjacency``.
    rng_label : tuple of int
        ``(master_seed, seed_index, repetition_index)`` that produced the graph.
    """

    n_left: int
    n_buckets: int
    degree: int
    adjacency: np.ndarray = field(repr=False)
    signs: np.ndarray = field(repr=False)
    rng_label: _rng.SeedTriple = (0, 0, 0)

    @property
    def n_edges(self) -> int:
        return self.n_left * self.degree

    def bucket_loads(self) -> np.ndarray:
        """Number of edges landing in each bucket."""
        return np.bincount(self.adjacency.ravel(), minlength=self.n_buckets)


@dataclass(frozen=True)
class SubsetDiagnostics:
    neighbor_count: int
    unique_neighbor_buckets: np.ndarray
    collision_excess: int
    per_vertex_unique: np.ndarray
    bucket_loads: np.ndarray


def _check_dims(n_left: int, n_buckets: int, degree: int) -> None:
    if n_left < 1 or n_buckets < 1 or degree < 1:
        raise ParameterError(
            f"sizes must be positive: n_left={n_left}, n_buckets={n_buckets}, degree={degree}"
        )
    if degree > n_buckets:
        raise ParameterError(f"degree={degree} cannot exceed n_buckets={n_buckets}")


def _distinct_buckets(rng: np.random.Generator, n_rows: int, n_buckets: int, degree: int) -> np.ndarray:
    # Partial Fisher-Yates over a virtual array [0, B) per row.  Only the
    # swapped-in positions are stored, so memory is O(n_rows * degree).
    pos = np.empty((n_rows, degree), dtype=np.int64)
    val = np.empty((n_rows, degree), dtype=np.int64)
    out = np.empty((n_rows, degree), dtype=np.int64)

    def value_at(x: np.ndarray, filled: int) -> np.ndarray:
        v = x.copy()
        for m in range(filled):  # later swaps overwrite earlier ones
            hit = pos[:, m] == x
            v[hit] = val[hit, m]
        return v

    for j in range(degree):
        k = j + rng.integers(0, n_buckets - j, size=n_rows, dtype=np.int64)
        out[:, j] = value_at(k, j)
        pos[:, j] = k
        val[:, j] = value_at(np.full(n_rows, j, dtype=np.int64), j)
    return out


def sample_expander(n_left: int, n_buckets: int, degree: int, rng_label: Sequence[int] = (0, 0, 0)) -> ExpanderSketch:
    """Sample a left-``degree``-regular signed bipartite graph.

    The graph is a pure function of ``rng_label``; two calls with the same
    label return bit-identical adjacency and signs.
    """
    _check_dims(n_left, n_buckets, degree)
    label = tuple(int(v) for v in rng_label)
    rng = _rng.make_rng(_rng.GRAPH, *label)
    adjacency = _distinct_buckets(rng, n_left, n_buckets, degree)
    signs = (2 * rng.integers(0, 2, size=(n_left, degree)) - 1).astype(np.int8)
    adjacency.setflags(write=False)
    signs.setflags(write=False)
    return ExpanderSketch(n_left, n_buckets, degree, adjacency, signs, label)


def _as_index_set(graph: ExpanderSketch, X: Iterable[int]) -> np.ndarray:
    idx = np.unique(np.asarray(list(X) if not isinstance(X, np.ndarray) else X, dtype=np.int64))
    if idx.size and (idx[0] < 0 or idx[-1] >= graph.n_left):
        raise ParameterError(f"subset indices must lie in [0, {graph.n_left})")
    return idx


def subset_diagnostics(graph: ExpanderSketch, X: Iterable[int]) -> SubsetDiagnostics:
    """Exact neighbourhood statistics of the left subset ``X``."""
    idx = _as_index_set(graph, X)
    edges = graph.adjacency[idx]
    loads = np.bincount(edges.ravel(), minlength=graph.n_buckets)
    unique = np.flatnonzero(loads == 1)
    per_vertex = (loads[edges] == 1).sum(axis=1) if idx.size else np.zeros(0, dtype=np.int64)
    return SubsetDiagnostics(
        neighbor_count=int(np.count_nonzero(loads)),
        unique_neighbor_buckets=unique,
        collision_excess=int(np.maximum(loads - 1, 0).sum()),
        per_vertex_unique=per_vertex,
        bucket_loads=loads,
    )


def expansion_loss(graph: ExpanderSketch, X: Iterable[int]) -> float:
    """``1 - |N(X)| / (d_L |X|)`` for a non-empty subset."""
    idx = _as_index_set(graph, X)
    if idx.size == 0:
        raise ParameterError("expansion loss of the empty set is undefined")
    n_nbrs = np.unique(graph.adjacency[idx]).size
    return 1.0 - n_nbrs / (graph.degree * idx.size)


def sample_subsets(graph: ExpanderSketch, max_set_size: int, trials: int,
                   rng_label: Sequence[int] = (0, 0, 0)) -> List[np.ndarray]:
    """Random left subsets used by :func:`audit_expansion`.

    Sizes are uniform on ``[1, max_set_size]`` and members uniform without
    replacement.  Deterministic in ``rng_label``.
    """
    if not 1 <= max_set_size <= graph.n_left:
        raise ParameterError(f"max_set_size must lie in [1, {graph.n_left}]")
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    rng = _rng.make_rng(_rng.SUBSETS, *rng_label)
    sizes = rng.integers(1, max_set_size + 1, size=trials)
    return [np.sort(rng.choice(graph.n_left, size=int(s), replace=False)) for s in sizes]


def audit_expansion(graph: ExpanderSketch, max_set_size: int, trials: int = 1000,
                    rng_label: Sequence[int] = (0, 0, 0), exhaustive: bool = False) -> float:
    """One-sided empirical estimate of the lossless parameter epsilon.

    Returns the largest expansion loss over the audited subsets.  With
    ``exhaustive=True`` every non-empty subset of size ``<= max_set_size`` is
    visited; only sensible for ``n_left <= 20``.
    """
    if exhaustive:
        if graph.n_left > 20:
            raise ParameterError("exhaustive audit is limited to n_left <= 20")
        if not 1 <= max_set_size <= graph.n_left:
            raise ParameterError(f"max_set_size must lie in [1, {graph.n_left}]")
        from itertools import combinations

        worst = 0.0
        for k in range(1, max_set_size + 1):
            for X in combinations(range(graph.n_left), k):
                worst = max(worst, expansion_loss(graph, X))
        return worst
    subsets = sample_subsets(graph, max_set_size, trials, rng_label)
    return max(expansion_loss(graph, X) for X in subsets)


@dataclass(frozen=True)
class ContaminationCensus:
    fraction_good: float
    mean_outliers: float
    fraction_inliers_covered: float
    unique_bucket_count: int


def light_contamination_census(graph: ExpanderSketch, inliers: Iterable[int],
                               outliers: Iterable[int], cap: int) -> ContaminationCensus:
    """Outlier counts inside the unique-neighbour buckets of the inlier set.

    A unique bucket of the inliers is *good* when it holds at most ``cap``
    outlier edges.  ``fraction_inliers_covered`` is the share of inliers that
    own at least one good bucket.
    """
    ins = _as_index_set(graph, inliers)
    outs = _as_index_set(graph, outliers)
    if np.intersect1d(ins, outs).size:
        raise ParameterError("inlier and outlier sets overlap")
    in_loads = np.bincount(graph.adjacency[ins].ravel(), minlength=graph.n_buckets)
    out_loads = np.bincount(graph.adjacency[outs].ravel(), minlength=graph.n_buckets)
    unique = in_loads == 1
    n_unique = int(unique.sum())
    if n_unique == 0:
        return ContaminationCensus(float("nan"), float("nan"), 0.0, 0)
    good = unique & (out_loads <= cap)
    covered = good[graph.adjacency[ins]].any(axis=1) if ins.size else np.zeros(0, bool)
    return ContaminationCensus(
        fraction_good=float(good.sum() / n_unique),
        mean_outliers=float(out_loads[unique].mean()),
        fraction_inliers_covered=float(covered.mean()) if ins.size else 0.0,
        unique_bucket_count=n_unique,
    )


def dump_adjacency(graph: ExpanderSketch) -> str:
    """Text adjacency list, one ``i: b1+,b2-,...`` line per left vertex."""
    lines = []
    for i in range(graph.n_left):
        cells = ",".join(
            f"{b}{'+' if s > 0 else '-'}" for b, s in zip(graph.adjacency[i], graph.signs[i])
        )
        lines.append(f"{i}: {cells}")
    return "\n".join(lines) + "\n"


def load_adjacency(text: str, n_buckets: int) -> ExpanderSketch:
    """Inverse of :func:`dump_adjacency`; the rng label is not recoverable."""
    rows = []
    for line in text.strip().splitlines():
        head, _, body = line.partition(":")
        cells = [c.strip() for c in body.split(",") if c.strip()]
        rows.append((int(head), [(int(c[:-1]), 1 if c[-1] == "+" else -1) for c in cells]))
    rows.sort()
    if [i for i, _ in rows] != list(range(len(rows))):
        raise ParameterError("adjacency dump must list vertices 0..n-1")
    degree = len(rows[0][1])
    if any(len(cells) != degree for _, cells in rows):
        raise ParameterError("adjacency dump is not left-regular")
    adjacency = np.array([[b for b, _ in cells] for _, cells in rows], dtype=np.int64)
    signs = np.array([[s for _, s in cells] for _, cells in rows], dtype=np.int8)
    _check_dims(len(rows), n_buckets, degree)
    return ExpanderSketch(len(rows), n_buckets, degree, adjacency, signs, (0, 0, 0))
