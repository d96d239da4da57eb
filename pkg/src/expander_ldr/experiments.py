"""Grid experiments comparing the expander estimator with classical baselines.

Every (grid value, replication seed) cell generates its data, fits each
requested method and evaluates on a clean test set.  Rows are written as CSV
with the columns in :data:`ROW_FIELDS`; per-(grid value, method) means and
standard deviations go to a sibling ``*_agg.csv``.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .baselines import huber_fit, ols_fit, ransac_fit, ridge_fit
from .data import (SynthConfig, TableSchema, build_real_mixture, evaluate, gen_synthetic_split,
                   load_table, response_mse)
from .errors import ParameterError
from .pipeline import PipelineConfig, run_list, run_seed, select_best

log = logging.getLogger(__name__)

KINDS = ("alpha_sweep", "scale_sweep", "dim_sweep", "ablation", "real_mixture", "single_run")
METHODS = ("ols", "ridge", "huber", "ransac", "expander1", "expanderL")
ROW_FIELDS = ("experiment", "grid_param", "grid_value", "seed", "method",
              "test_mse", "param_error", "wall_ms", "status")
AGG_FIELDS = ("experiment", "grid_param", "grid_value", "method", "n_ok",
              "mean_test_mse", "std_test_mse", "mean_param_error", "std_param_error")

_GRID_PARAM = {"alpha_sweep": "alpha", "scale_sweep": "outlier_scale", "dim_sweep": "d",
               "real_mixture": "alpha", "single_run": "none"}
RIDGE_LAMBDA = 1.0


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    grid: Tuple[Any, ...]
    seeds: Tuple[int, ...] = (0, 1, 2, 3, 4)
    synth: SynthConfig = SynthConfig()
    pipeline: PipelineConfig = PipelineConfig()
    methods: Tuple[str, ...] = METHODS
    grid_param: Optional[str] = None
    n_test: int = 2000
    jobs: int = 1
    timing: bool = False
    inlier_path: Optional[str] = None
    outlier_path: Optional[str] = None
    inlier_schema: TableSchema = TableSchema()
    outlier_schema: TableSchema = TableSchema()
    pca_dim: int = 10
    out: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"experiment kind must be one of {KINDS}")
        if not self.grid:
            raise ParameterError("grid must be non-empty")
        if not self.seeds:
            raise ParameterError("need at least one replication seed")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ParameterError(f"unknown methods {sorted(bad)}")
        if self.kind == "ablation":
            names = {f.name for f in dataclasses.fields(PipelineConfig)}
            if self.grid_param not in names:
                raise ParameterError(f"ablation needs grid_param among {sorted(names)}")
        if self.kind == "real_mixture" and not (self.inlier_path and self.outlier_path):
            raise ParameterError("real_mixture needs inlier_path and outlier_path")

    @property
    def param(self) -> str:
        return self.grid_param if self.kind == "ablation" else _GRID_PARAM[self.kind]


def _fmt(x) -> str:
    if x is None or x == "":
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x)) if np.isfinite(x) else str(float(x))
    return str(x)


def _cell_configs(spec: ExperimentSpec, value, seed: int) -> Tuple[SynthConfig, PipelineConfig]:
    synth = dataclasses.replace(spec.synth, seed=seed)
    pipe = spec.pipeline.replace(master_seed=seed)
    if spec.kind in ("alpha_sweep", "real_mixture"):
        synth = dataclasses.replace(synth, alpha=float(value))
        pipe = pipe.replace(alpha=float(value))
    elif spec.kind == "scale_sweep":
        synth = dataclasses.replace(synth, outlier_scale=float(value))
    elif spec.kind == "dim_sweep":
        synth = dataclasses.replace(synth, d=int(value))
    elif spec.kind == "ablation":
        ftype = type(getattr(PipelineConfig(), spec.grid_param))
        pipe = pipe.replace(**{spec.grid_param: ftype(value)})
    if spec.kind != "real_mixture" and spec.kind != "alpha_sweep":
        pipe = pipe.replace(alpha=synth.alpha)
    return synth, pipe


def _fit_methods(X, y, pipe: PipelineConfig, methods: Sequence[str], seed: int, X_sel, y_sel):
    """Yield ``(method, w_hat or exception, wall_ms)`` for every requested method."""
    fitters = {
        "ols": lambda: ols_fit(X, y).w_hat,
        "ridge": lambda: ridge_fit(X, y, RIDGE_LAMBDA).w_hat,
        "huber": lambda: huber_fit(X, y).w_hat,
        "ransac": lambda: ransac_fit(X, y, seed=seed).w_hat,
        "expander1": lambda: run_seed(X, y, pipe, 1).ell_hat,
        "expanderL": lambda: select_best(run_list(X, y, pipe), X_sel, y_sel),
    }
    for m in methods:
        t0 = time.perf_counter()
        try:
            w = fitters[m]()
        except Exception as exc:  # a failed method is recorded, the grid goes on
            log.warning("%s failed: %s", m, exc)
            w = exc
        yield m, w, 1e3 * (time.perf_counter() - t0)


def run_cell(spec: ExperimentSpec, value, seed: int) -> List[Dict[str, str]]:
    synth, pipe = _cell_configs(spec, value, seed)
    base = {"experiment": spec.kind, "grid_param": spec.param, "grid_value": _fmt(value), "seed": str(seed)}
    rows = []
    try:
        if spec.kind == "real_mixture":
            mix = build_real_mixture(load_table(spec.inlier_path, spec.inlier_schema),
                                     load_table(spec.outlier_path, spec.outlier_schema),
                                     n=synth.n, alpha=synth.alpha, pca_dim=spec.pca_dim,
                                     n_test=spec.n_test, seed=seed)
            train, test = mix.train, mix.test
            methods = list(spec.methods) + ["oracle_ols"]
        else:
            train, test = gen_synthetic_split(synth, spec.n_test)
            methods = list(spec.methods)
    except Exception as exc:
        log.warning("cell %s=%s seed=%d failed: %s", spec.param, value, seed, exc)
        return [dict(base, method=m, test_mse="", param_error="", wall_ms="",
                     status=f"error:{type(exc).__name__}") for m in spec.methods]

    fit_methods = [m for m in methods if m != "oracle_ols"]
    results = list(_fit_methods(train.X, train.y, pipe, fit_methods, seed, test.X, test.y))
    if "oracle_ols" in methods:
        t0 = time.perf_counter()
        results.append(("oracle_ols", ols_fit(mix.oracle_X, mix.oracle_y).w_hat, 1e3 * (time.perf_counter() - t0)))
    for m, w, ms in results:
        row = dict(base, method=m, wall_ms=_fmt(round(ms, 3)) if spec.timing else "")
        if isinstance(w, Exception):
            row.update(test_mse="", param_error="", status=f"error:{type(w).__name__}")
        elif test.w_star is not None:
            met = evaluate(w, test)
            row.update(test_mse=_fmt(met.test_mse), param_error=_fmt(met.param_error), status="ok")
        else:
            row.update(test_mse=_fmt(response_mse(w, test)), param_error="", status="ok")
        rows.append(row)
    return rows


def _run_cell_args(args):
    return run_cell(*args)


def run_experiment(spec: ExperimentSpec) -> List[Dict[str, str]]:
    """All rows of the grid, in (grid index, seed, method) order."""
    cells = [(spec, v, s) for v in spec.grid for s in spec.seeds]
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            chunks = list(pool.map(_run_cell_args, cells))
    else:
        chunks = [run_cell(*c) for c in cells]
    return [row for chunk in chunks for row in chunk]


def run_ablation(spec: ExperimentSpec) -> List[Dict[str, str]]:
    """Vary one :class:`PipelineConfig` field; the expander methods only, by default."""
    if spec.kind != "ablation":
        raise ParameterError("run_ablation needs an ablation spec")
    return run_experiment(spec)


def aggregate(rows: Sequence[Dict[str, str]]) -> List[Dict[str, str]]:
    """Mean and (population) standard deviation per grid value and method."""
    groups: Dict[Tuple[str, ...], List[Dict[str, str]]] = {}
    for r in rows:
        key = (r["experiment"], r["grid_param"], r["grid_value"], r["method"])
        groups.setdefault(key, []).append(r)
    out = []
    for (exp, param, value, method), grp in groups.items():
        ok = [r for r in grp if r["status"] == "ok"]
        rec = {"experiment": exp, "grid_param": param, "grid_value": value, "method": method,
               "n_ok": str(len(ok))}
        for col in ("test_mse", "param_error"):
            vals = np.array([float(r[col]) for r in ok if r[col] != ""])
            rec[f"mean_{col}"] = _fmt(vals.mean()) if vals.size else ""
            rec[f"std_{col}"] = _fmt(vals.std()) if vals.size else ""
        out.append(rec)
    return out


def rows_to_csv(rows: Sequence[Dict[str, str]], fields: Sequence[str] = ROW_FIELDS) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def read_rows(path) -> List[Dict[str, str]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) not in (ROW_FIELDS, AGG_FIELDS):
            raise ParameterError(f"{path}: unexpected header {reader.fieldnames}")
        return list(reader)


def aggregate_path(out: Path) -> Path:
    out = Path(out)
    return out.with_name(out.stem + "_agg" + (out.suffix or ".csv"))


def write_results(rows: Sequence[Dict[str, str]], out) -> Tuple[Path, Path]:
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(rows_to_csv(rows))
    agg = aggregate_path(out)
    agg.write_text(rows_to_csv(aggregate(rows), AGG_FIELDS))
    return out, agg


def summary_table(agg_rows: Sequence[Dict[str, str]], col: str = "test_mse") -> Dict[str, Dict[str, float]]:
    """``{grid_value: {method: mean}}`` view of aggregate rows."""
    table: Dict[str, Dict[str, float]] = {}
    for r in agg_rows:
        if r[f"mean_{col}"] != "":
            table.setdefault(r["grid_value"], {})[r["method"]] = float(r[f"mean_{col}"])
    return table
