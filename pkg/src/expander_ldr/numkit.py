"""Small dense symmetric linear algebra used by the estimator."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import _rng
from .errors import IndefiniteMomentsError, ParameterError


@dataclass(frozen=True)
class EigenPair:
    value: float
    vector: np.ndarray
    converged: bool = True
    iterations: int = 0


@dataclass(frozen=True)
class Clusters:
    labels: np.ndarray
    centers: np.ndarray

    @property
    def n_clusters(self) -> int:
        return self.centers.shape[0]


def _square(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise ParameterError(f"expected a non-empty square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ParameterError("matrix has non-finite entries")
    return M


def _fix_sign(v: np.ndarray) -> np.ndarray:
    return -v if v[np.argmax(np.abs(v))] < 0 else v


def ridge_solve(sigma_hat: np.ndarray, g_hat: np.ndarray, lam: float = 0.0) -> np.ndarray:
    """Solve ``(sigma_hat + lam * I) x = g_hat`` by Cholesky factorisation.

    Raises
    ------
    IndefiniteMomentsError
        If the shifted matrix is not numerically positive definite; callers
        are expected to retry with a larger ``lam``.
    """
    S = _square(sigma_hat)
    if lam < 0:
        raise ParameterError("lambda must be non-negative")
    A = 0.5 * (S + S.T) + lam * np.eye(S.shape[0])
    try:
        factor = sla.cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise IndefiniteMomentsError(f"sigma_hat + {lam:g} I is not positive definite") from exc
    return sla.cho_solve(factor, np.asarray(g_hat, dtype=np.float64), check_finite=False)


def top_eigenpair(M: np.ndarray, tol: float = 1e-8, max_iter: int = 1000,
                  rng_label: Sequence[int] = (0, 0, 0), block: int = 4, return_history: bool = False):
    """Dominant-magnitude eigenpair by blocked power iteration.

    A block of ``min(block, d)`` vectors is repeatedly multiplied by ``M`` and
    re-orthonormalised; the Rayleigh-Ritz value of largest magnitude is
    tracked.  Iteration stops when successive values differ by less than
    ``tol * |value|``.  With ``block=1`` this is plain power iteration.

    The eigenvector sign is fixed so that its largest-magnitude entry is
    positive.  On hitting ``max_iter`` the last iterate is returned with
    ``converged=False``.  With ``return_history=True`` the per-iteration
    values are returned as well.
    """
    M = _square(M)
    M = 0.5 * (M + M.T)
    d = M.shape[0]
    history: list = []

    def done(pair: EigenPair):
        return (pair, history) if return_history else pair

    if d == 1:
        return done(EigenPair(float(M[0, 0]), np.ones(1), True, 0))
    p = max(1, min(block, d))
    rng = _rng.make_rng(_rng.EIGEN, *rng_label)
    Q, _ = np.linalg.qr(rng.standard_normal((d, p)))

    prev = None
    value, vector = 0.0, Q[:, 0]
    for it in range(1, max_iter + 1):
        Z = M @ Q
        if not np.any(Z):
            return done(EigenPair(0.0, _fix_sign(Q[:, 0]), True, it))
        Q, _ = np.linalg.qr(Z)
        ritz, W = np.linalg.eigh(Q.T @ M @ Q)
        j = int(np.argmax(np.abs(ritz)))
        value, vector = float(ritz[j]), Q @ W[:, j]
        history.append(value)
        if prev is not None and abs(value - prev) <= tol * max(abs(value), np.finfo(float).tiny):
            vector /= np.linalg.norm(vector)
            return done(EigenPair(value, _fix_sign(vector), True, it))
        prev = value
    vector /= np.linalg.norm(vector)
    return done(EigenPair(value, _fix_sign(vector), False, max_iter))


def pca_fit(X: np.ndarray, k: int) -> np.ndarray:
    """Top-``k`` principal directions of the column-centred data, as a ``d x k`` basis."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ParameterError("pca_fit needs a 2-D array with at least two rows")
    d = X.shape[1]
    if not 1 <= k <= d:
        raise ParameterError(f"k must lie in [1, {d}], got {k}")
    Xc = X - X.mean(axis=0)
    cov = Xc.T @ Xc / (X.shape[0] - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1][:k]
    basis = vecs[:, order]
    return np.column_stack([_fix_sign(basis[:, j]) for j in range(k)])


def _pairwise_distances(P: np.ndarray) -> np.ndarray:
    """Euclidean distances scaled by the largest coordinate gap, so tiny gaps do not underflow to 0."""
    diff = P[:, None, :] - P[None, :, :]
    m = np.abs(diff).max(axis=-1)
    safe = np.where(m > 0, m, 1.0)
    return m * np.sqrt(((diff / safe[..., None]) ** 2).sum(axis=-1))


def single_linkage_clusters(points: np.ndarray, radius: float) -> Clusters:
    """Connected components of the graph joining points at distance ``<= radius``.

    Labels are numbered by first appearance; centers are coordinate means.
    """
    P = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if P.shape[0] == 0:
        raise ParameterError("need at least one point")
    if radius < 0:
        raise ParameterError("radius must be non-negative")
    n = P.shape[0]
    if n == 1:
        return Clusters(np.zeros(1, dtype=np.int64), P.copy())
    adj = _pairwise_distances(P) <= radius
    _, raw = connected_components(csr_matrix(adj), directed=False)
    _, first = np.unique(raw, return_index=True)
    relabel = np.empty(first.size, dtype=np.int64)
    relabel[np.argsort(first)] = np.arange(first.size)
    labels = relabel[raw]
    centers = np.stack([P[labels == c].mean(axis=0) for c in range(first.size)])
    return Clusters(labels, centers)
