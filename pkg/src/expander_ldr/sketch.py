"""Signed expander sketches applied to a regression design.

Rows of ``X`` are grouped into buckets by ``r`` independent expander graphs.
A bucket's statistics are computed on its own rows (kept separate, not
summed), normalised by the bucket's row count::

    H = mean(x x^T),   g = mean(x y),   C(l) = mean((y - <x, l>)^2 x x^T)

Edge signs square away in all three, so they are carried for completeness
(and for :meth:`BucketAssignment.signed_matrix`) but never change a value.
Bucket keys are flat integers ``t * B + b``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .errors import EmptyBucketError, ParameterError
from .expander import ExpanderSketch


@dataclass(frozen=True)
class BucketStats:
    H: np.ndarray
    g: np.ndarray
    count: int


@dataclass(frozen=True)
class BucketAssignment:
    """Row membership of every (repetition, bucket) pair.

    For repetition ``t`` the rows of bucket ``b`` are
    ``rows[t][offsets[t][b]:offsets[t][b + 1]]`` in increasing row order, with
    aligned ``signs``.
    """

    n_rows: int
    repetition_count: int
    bucket_count: int
    degree: int
    rows: List[np.ndarray] = field(repr=False)
    signs: List[np.ndarray] = field(repr=False)
    offsets: List[np.ndarray] = field(repr=False)

    @property
    def n_keys(self) -> int:
        return self.repetition_count * self.bucket_count

    def key(self, t: int, b: int) -> int:
        return t * self.bucket_count + b

    def split_key(self, key: int) -> Tuple[int, int]:
        return divmod(int(key), self.bucket_count)

    def counts(self) -> np.ndarray:
        """Row count of every bucket key, shape ``(r * B,)``."""
        return np.concatenate([np.diff(o) for o in self.offsets])

    def membership(self, t: int, b: int) -> List[Tuple[int, int]]:
        self._check(t, b)
        lo, hi = self.offsets[t][b], self.offsets[t][b + 1]
        return list(zip(self.rows[t][lo:hi].tolist(), self.signs[t][lo:hi].tolist()))

    def bucket_rows(self, t: int, b: int) -> np.ndarray:
        self._check(t, b)
        return self.rows[t][self.offsets[t][b]:self.offsets[t][b + 1]]

    def indicator(self) -> sp.csr_matrix:
        """Unsigned ``(r * B) x n`` membership matrix with unit entries."""
        indptr = [np.zeros(1, dtype=np.int64)]
        base = 0
        for o in self.offsets:
            indptr.append(o[1:] + base)
            base += o[-1]
        data = np.ones(base, dtype=np.float64)
        return sp.csr_matrix(
            (data, np.concatenate(self.rows), np.concatenate(indptr)),
            shape=(self.n_keys, self.n_rows),
        )

    def signed_matrix(self, t: int) -> sp.csr_matrix:
        """The ``B x n`` signed sketching matrix ``S_t`` of repetition ``t``."""
        return sp.csr_matrix(
            (self.signs[t].astype(np.float64), self.rows[t], self.offsets[t]),
            shape=(self.bucket_count, self.n_rows),
        )

    def _check(self, t: int, b: int) -> None:
        if not (0 <= t < self.repetition_count and 0 <= b < self.bucket_count):
            raise ParameterError(f"bucket ({t}, {b}) out of range")


def assign_buckets(X: np.ndarray, y: np.ndarray, graphs: Sequence[ExpanderSketch]) -> BucketAssignment:
    """Invert row->bucket edges of every graph into bucket->row lists.

    Cost is one stable sort of ``n * d_L`` edges per repetition.
    """
    X = np.asarray(X)
    y = np.asarray(y)
    if not graphs:
        raise ParameterError("at least one graph is required")
    n = X.shape[0]
    if y.shape != (n,):
        raise ParameterError(f"y must have shape ({n},), got {y.shape}")
    g0 = graphs[0]
    for g in graphs:
        if g.n_left != n:
            raise ParameterError(f"graph has n_left={g.n_left} but data has {n} rows")
        if g.n_buckets != g0.n_buckets or g.degree != g0.degree:
            raise ParameterError("all graphs must share n_buckets and degree")

    rows, signs, offsets = [], [], []
    left = np.repeat(np.arange(n, dtype=np.int64), g0.degree)
    for g in graphs:
        right = g.adjacency.ravel()
        order = np.argsort(right, kind="stable")  # stable keeps row order inside a bucket
        rows.append(left[order])
        signs.append(g.signs.ravel()[order])
        off = np.zeros(g.n_buckets + 1, dtype=np.int64)
        np.cumsum(np.bincount(right, minlength=g.n_buckets), out=off[1:])
        offsets.append(off)
    return BucketAssignment(n, len(graphs), g0.n_buckets, g0.degree, rows, signs, offsets)


def bucket_moments(X: np.ndarray, y: np.ndarray, assignment: BucketAssignment, t: int, b: int) -> BucketStats:
    idx = assignment.bucket_rows(t, b)
    if idx.size == 0:
        raise EmptyBucketError(f"bucket ({t}, {b}) is empty")
    A = np.asarray(X, dtype=np.float64)[idx]
    yb = np.asarray(y, dtype=np.float64)[idx]
    return BucketStats(H=A.T @ A / idx.size, g=A.T @ yb / idx.size, count=int(idx.size))


def bucket_residual_matrix(X: np.ndarray, y: np.ndarray, assignment: BucketAssignment,
                           t: int, b: int, ell_hat: np.ndarray) -> np.ndarray:
    idx = assignment.bucket_rows(t, b)
    if idx.size == 0:
        raise EmptyBucketError(f"bucket ({t}, {b}) is empty")
    A = np.asarray(X, dtype=np.float64)[idx]
    r = np.asarray(y, dtype=np.float64)[idx] - A @ ell_hat
    return (A * (r * r)[:, None]).T @ A / idx.size


# --- vectorised forms used by the pipeline -------------------------------------


def row_outer(X: np.ndarray) -> np.ndarray:
    """Row-wise flattened outer products, shape ``(n, d * d)``."""
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    return (X[:, :, None] * X[:, None, :]).reshape(n, d * d)


def all_bucket_moments(X: np.ndarray, y: np.ndarray, assignment: BucketAssignment,
                       outer: Optional[np.ndarray] = None):
    """``(H, g, counts)`` for every bucket key; empty buckets get zeros.

    Shapes are ``(K, d, d)``, ``(K, d)`` and ``(K,)`` with ``K = r * B``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    d = X.shape[1]
    P = assignment.indicator()
    counts = np.asarray(P.sum(axis=1)).ravel()
    inv = np.divide(1.0, counts, out=np.zeros_like(counts), where=counts > 0)
    if outer is None:
        outer = row_outer(X)
    H = (P @ outer) * inv[:, None]
    g = (P @ (X * y[:, None])) * inv[:, None]
    return H.reshape(-1, d, d), g, counts.astype(np.int64)


def residual_matrices(X: np.ndarray, y: np.ndarray, assignment: BucketAssignment, ell_hat: np.ndarray,
                      keys: np.ndarray, outer: Optional[np.ndarray] = None,
                      indicator: Optional[sp.csr_matrix] = None) -> np.ndarray:
    """Normalised residual matrices ``C_k(ell_hat)`` for the given bucket keys."""
    X = np.asarray(X, dtype=np.float64)
    d = X.shape[1]
    P = (assignment.indicator() if indicator is None else indicator)[keys]
    counts = np.asarray(P.sum(axis=1)).ravel()
    if np.any(counts == 0):
        raise EmptyBucketError("residual matrix requested for an empty bucket")
    r2 = (np.asarray(y, dtype=np.float64) - X @ ell_hat) ** 2
    if outer is None:
        outer = row_outer(X)
    C = (P @ (outer * r2[:, None])) / counts[:, None]
    return C.reshape(-1, d, d)
