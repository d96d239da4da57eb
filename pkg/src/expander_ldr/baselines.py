"""Classical regressors fitted on contaminated data, for comparison."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import _rng
from .errors import ConsensusError, ParameterError, SingularDesignError

MAD_TO_SIGMA = 1.4826


@dataclass(frozen=True)
class BaselineFit:
    w_hat: np.ndarray
    method: str
    iterations: int = 0


def _spd_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        factor = sla.cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularDesignError("normal equations are singular") from exc
    # Cholesky can succeed on numerically rank-deficient systems
    if np.min(np.abs(np.diag(factor[0]))) <= np.sqrt(np.finfo(float).eps) * np.sqrt(np.max(np.abs(np.diag(A)))):
        raise SingularDesignError("normal equations are numerically singular")
    return sla.cho_solve(factor, b, check_finite=False)


def _check(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ParameterError(f"inconsistent shapes X={X.shape}, y={y.shape}")
    return X, y


def mad_scale(r: np.ndarray) -> float:
    """Normal-consistent median absolute deviation."""
    return float(MAD_TO_SIGMA * np.median(np.abs(r - np.median(r))))


def ols_fit(X, y) -> BaselineFit:
    X, y = _check(X, y)
    if X.shape[0] < X.shape[1]:
        raise SingularDesignError("fewer rows than columns")
    return BaselineFit(_spd_solve(X.T @ X, X.T @ y), "ols")


def ridge_fit(X, y, lam: float = 1.0) -> BaselineFit:
    X, y = _check(X, y)
    if lam < 0:
        raise ParameterError("lambda must be non-negative")
    A = X.T @ X + lam * np.eye(X.shape[1])
    return BaselineFit(_spd_solve(A, X.T @ y), "ridge")


def huber_objective(X, y, w, delta: float) -> float:
    r = np.abs(y - X @ w)
    return float(np.sum(np.where(r <= delta, 0.5 * r * r, delta * r - 0.5 * delta * delta)))


def huber_fit(X, y, delta: float | None = None, max_iter: int = 100, tol: float = 1e-8,
              return_history: bool = False):
    """Huber regression by iteratively reweighted least squares.

    Weights are ``min(1, delta / |r_i|)``.  When ``delta`` is omitted it is
    set to 1.35 times the MAD scale of the OLS residuals.
    """
    X, y = _check(X, y)
    w = ols_fit(X, y).w_hat
    if delta is None:
        delta = 1.35 * max(mad_scale(y - X @ w), np.finfo(float).eps)
    if delta <= 0:
        raise ParameterError("delta must be positive")
    history = [huber_objective(X, y, w, delta)]
    it = 0
    for it in range(1, max_iter + 1):
        r = np.abs(y - X @ w)
        wt = np.minimum(1.0, delta / np.maximum(r, np.finfo(float).tiny))
        w_new = _spd_solve((X * wt[:, None]).T @ X, (X * wt[:, None]).T @ y)
        done = np.linalg.norm(w_new - w) < tol * (1.0 + np.linalg.norm(w))
        w = w_new
        history.append(huber_objective(X, y, w, delta))
        if done:
            break
    fit = BaselineFit(w, "huber", it)
    return (fit, history) if return_history else fit


def ransac_fit(X, y, min_samples: int | None = None, residual_threshold: float | None = None,
               n_trials: int = 100, seed: int = 0) -> BaselineFit:
    """RANSAC around OLS.

    Each trial fits OLS on ``min_samples`` random rows and counts rows with
    ``|residual| <= residual_threshold``; the largest consensus (earliest trial
    on ties) is refitted by OLS.  Defaults: ``min_samples = d`` and a threshold
    of 2.5 times the MAD scale of the OLS residuals.
    """
    X, y = _check(X, y)
    n, d = X.shape
    if min_samples is None:
        min_samples = d
    if min_samples < d or min_samples > n:
        raise ParameterError(f"min_samples must lie in [{d}, {n}]")
    if residual_threshold is None:
        residual_threshold = 2.5 * mad_scale(y - X @ ols_fit(X, y).w_hat)
    rng = _rng.make_rng(_rng.BASELINE, seed)
    best = None
    for _ in range(n_trials):
        idx = rng.choice(n, size=min_samples, replace=False)
        try:
            w, *_ = np.linalg.lstsq(X[idx], y[idx], rcond=None)
        except np.linalg.LinAlgError:
            continue
        consensus = np.abs(y - X @ w) <= residual_threshold
        size = int(consensus.sum())
        if size >= min_samples and (best is None or size > best[0]):
            best = (size, consensus)
    if best is None:
        raise ConsensusError("no trial reached a consensus of min_samples rows")
    fit = ols_fit(X[best[1]], y[best[1]])
    return BaselineFit(fit.w_hat, "ransac", n_trials)
