"""Contaminated regression data: synthetic generator, metrics, tables, real mixtures."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from . import _rng
from .errors import ParameterError
from .numkit import pca_fit

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    inlier_mask: Optional[np.ndarray] = None
    w_star: Optional[np.ndarray] = None

    def __post_init__(self):
        n = self.X.shape[0]
        if self.X.ndim != 2 or self.y.shape != (n,):
            raise ParameterError(f"inconsistent shapes X={self.X.shape}, y={self.y.shape}")
        if self.inlier_mask is not None:
            if self.inlier_mask.shape != (n,):
                raise ParameterError("inlier_mask must have one entry per row")
            if not 1 <= int(self.inlier_mask.sum()) <= n:
                raise ParameterError("inlier_mask must mark at least one row")
        if self.w_star is not None and self.w_star.shape != (self.X.shape[1],):
            raise ParameterError("w_star must have one entry per column")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class SynthConfig:
    n: int = 5000
    d: int = 20
    alpha: float = 0.3
    noise_sigma: float = 0.1
    outlier_scale: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ParameterError("n and d must be positive")
        if not 0.0 < self.alpha <= 1.0:
            raise ParameterError("alpha must lie in (0, 1]")
        if self.noise_sigma < 0 or self.outlier_scale < 0:
            raise ParameterError("noise_sigma and outlier_scale must be non-negative")
        if int(self.alpha * self.n) < 1:
            raise ParameterError("alpha * n must leave at least one inlier")


def gen_synthetic(cfg: SynthConfig) -> Dataset:
    """Gaussian design; ``floor(alpha n)`` inliers follow the linear model.

    Outliers keep their Gaussian covariates but get responses drawn
    independently from ``Unif[-S, S]``.
    """
    rng = _rng.make_rng(_rng.DATA, cfg.seed, 0)
    w_star = rng.standard_normal(cfg.d)
    X = rng.standard_normal((cfg.n, cfg.d))
    n_in = int(np.floor(cfg.alpha * cfg.n))
    mask = np.zeros(cfg.n, dtype=bool)
    mask[rng.permutation(cfg.n)[:n_in]] = True
    y = X @ w_star + cfg.noise_sigma * rng.standard_normal(cfg.n)
    y[~mask] = rng.uniform(-cfg.outlier_scale, cfg.outlier_scale, size=cfg.n - n_in)
    return Dataset(X, y, mask, w_star)


def make_test_set(w_star: np.ndarray, n_test: int = 2000, seed: int = 0) -> Dataset:
    """Clean test set sharing the training instance's ``w_star``."""
    rng = _rng.make_rng(_rng.DATA, seed, 1)
    X = rng.standard_normal((n_test, w_star.shape[0]))
    return Dataset(X, X @ w_star, np.ones(n_test, dtype=bool), np.asarray(w_star))


def gen_synthetic_split(cfg: SynthConfig, n_test: int = 2000) -> Tuple[Dataset, Dataset]:
    train = gen_synthetic(cfg)
    return train, make_test_set(train.w_star, n_test, cfg.seed)


@dataclass(frozen=True)
class Metrics:
    param_error: float
    test_mse: float


def evaluate(w_hat: np.ndarray, test: Dataset) -> Metrics:
    """Parameter error and noise-free test MSE against ``test.w_star``."""
    if test.w_star is None:
        raise ParameterError("evaluate needs a test set with a known w_star")
    diff = np.asarray(w_hat, dtype=np.float64) - test.w_star
    return Metrics(float(np.linalg.norm(diff)), float(np.mean((test.X @ diff) ** 2)))


def response_mse(w_hat: np.ndarray, test: Dataset) -> float:
    """Mean squared prediction error against observed responses (real data)."""
    return float(np.mean((test.X @ np.asarray(w_hat) - test.y) ** 2))


# --- tabular ingestion ------------------------------------------------------------


@dataclass(frozen=True)
class Table:
    X: np.ndarray
    y: np.ndarray
    feature_names: List[str]
    response_name: str
    rejected: int = 0


@dataclass(frozen=True)
class TableSchema:
    """Which column is the response and which are features.

    Columns may be given by header name or 0-based position; ``features=None``
    means every column other than the response.
    """

    response: Union[str, int] = -1
    features: Optional[Sequence[Union[str, int]]] = None
    delimiter: str = ","


def _column_index(header: List[str], col: Union[str, int]) -> int:
    if isinstance(col, int):
        if not -len(header) <= col < len(header):
            raise ParameterError(f"column {col} out of range for {len(header)} columns")
        return col % len(header)
    try:
        return header.index(col)
    except ValueError:
        raise ParameterError(f"no column named {col!r}; header is {header}") from None


def load_table(path: Union[str, Path], schema: TableSchema = TableSchema()) -> Table:
    """Read a delimited numeric table with a header row.

    Rows with a wrong field count or a non-numeric field are skipped and
    counted in ``Table.rejected``.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        header = next(reader, None)
        if not header or any(not h.strip() for h in header):
            raise ParameterError(f"{path}: missing or malformed header")
        header = [h.strip() for h in header]
        resp = _column_index(header, schema.response)
        feats = ([i for i in range(len(header)) if i != resp] if schema.features is None
                 else [_column_index(header, c) for c in schema.features])
        rows, rejected = [], 0
        for rec in reader:
            if not rec or all(not f.strip() for f in rec):
                continue
            if len(rec) != len(header):
                rejected += 1
                continue
            try:
                vals = [float(f) for f in rec]
            except ValueError:
                rejected += 1
                continue
            if not all(np.isfinite(vals)):
                rejected += 1
                continue
            rows.append(vals)
    if not rows:
        raise ParameterError(f"{path}: no valid data rows")
    if rejected:
        log.warning("%s: rejected %d malformed rows", path, rejected)
    M = np.asarray(rows)
    return Table(M[:, feats], M[:, resp], [header[i] for i in feats], header[resp], rejected)


def save_dataset(ds: Dataset, path: Union[str, Path]) -> None:
    """Write ``x0..x{d-1},y[,inlier]`` with a header row."""
    cols = [f"x{j}" for j in range(ds.d)] + ["y"]
    data = [ds.X, ds.y[:, None]]
    if ds.inlier_mask is not None:
        cols.append("inlier")
        data.append(ds.inlier_mask[:, None].astype(float))
    np.savetxt(path, np.hstack(data), delimiter=",", header=",".join(cols), comments="", fmt="%.17g")


# --- real-data mixture ------------------------------------------------------------


def standardize_columns(X: np.ndarray) -> np.ndarray:
    """Centre every column and scale to unit variance where the variance is non-zero."""
    Xc = X - X.mean(axis=0)
    std = Xc.std(axis=0)
    return Xc / np.where(std > 0, std, 1.0)


def poly2_features(X: np.ndarray) -> np.ndarray:
    """Degree-2 expansion without bias: ``x_i`` then ``x_i x_j`` for ``i <= j``."""
    k = X.shape[1]
    iu, ju = np.triu_indices(k)
    return np.hstack([X, X[:, iu] * X[:, ju]])


@dataclass(frozen=True)
class RealMixture:
    train: Dataset
    test: Dataset
    oracle_X: np.ndarray
    oracle_y: np.ndarray
    response_offset: float = field(default=0.0)


def build_real_mixture(inlier_table: Table, outlier_table: Table, n: int = 1400, alpha: float = 0.3,
                       pca_dim: int = 10, n_test: int = 1000, seed: int = 0) -> RealMixture:
    """Embed two real tables in one feature space and form a contaminated training set.

    Outlier features are zero-padded to the inlier width; the concatenated
    design is standardised, expanded to degree-2 features and projected on
    its top ``pca_dim`` principal directions.  Responses are centred by the
    concatenated mean (stored as ``response_offset``).  ``n_test`` inlier rows
    form the clean test set; the other inlier rows are returned for the
    oracle fit; training outliers have their responses permuted.
    """
    k_in, k_out = inlier_table.X.shape[1], outlier_table.X.shape[1]
    if k_out > k_in:
        raise ParameterError("outlier table has more features than the inlier table")
    if not 0.0 < alpha <= 1.0:
        raise ParameterError("alpha must lie in (0, 1]")
    n_in = int(np.floor(alpha * n))
    n_out = n - n_in
    m_in, m_out = inlier_table.X.shape[0], outlier_table.X.shape[0]
    if m_in < n_test + n_in or (n_out and m_out < n_out):
        raise ParameterError(
            f"insufficient rows: need {n_test + n_in} inlier and {n_out} outlier rows, "
            f"have {m_in} and {m_out}"
        )

    padded = np.hstack([outlier_table.X, np.zeros((m_out, k_in - k_out))])
    Z = poly2_features(standardize_columns(np.vstack([inlier_table.X, padded])))
    basis = pca_fit(Z, pca_dim)
    F = (Z - Z.mean(axis=0)) @ basis
    F_in, F_out = F[:m_in], F[m_in:]
    y_all = np.concatenate([inlier_table.y, outlier_table.y])
    offset = float(y_all.mean())
    y_in, y_out = inlier_table.y - offset, outlier_table.y - offset

    rng = _rng.make_rng(_rng.DATA, seed, 2)
    perm_in = rng.permutation(m_in)
    test_idx, pool_idx = perm_in[:n_test], perm_in[n_test:]
    train_in = pool_idx[:n_in]
    train_out = rng.permutation(m_out)[:n_out]
    y_train_out = y_out[train_out][rng.permutation(n_out)]

    X = np.vstack([F_in[train_in], F_out[train_out]])
    y = np.concatenate([y_in[train_in], y_train_out])
    mask = np.concatenate([np.ones(n_in, bool), np.zeros(n_out, bool)])
    order = rng.permutation(n)
    train = Dataset(X[order], y[order], mask[order], None)
    test = Dataset(F_in[test_idx], y_in[test_idx], np.ones(n_test, bool), None)
    return RealMixture(train, test, F_in[pool_idx], y_in[pool_idx], offset)
