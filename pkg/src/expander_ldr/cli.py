"""Command-line entry point: data synthesis, single fits, sweeps and ablations.

Every subcommand also accepts ``--spec FILE``, a flat ``key = value`` text
file whose keys are the long flag names (dashes or underscores).  Flags given
on the command line override the file.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .data import SynthConfig, TableSchema, gen_synthetic, load_table, save_dataset
from .errors import ParameterError
from .expander import audit_expansion, sample_expander
from .experiments import METHODS, ExperimentSpec, run_experiment, write_results
from .pipeline import PipelineConfig, candidate_list_to_dict, run_list

log = logging.getLogger("expander_ldr")

_SYNTH_FLAGS = {"n": int, "d": int, "noise_sigma": float, "outlier_scale": float}
_PIPE_FLAGS = {"n_buckets": int, "repetitions": int, "degree": int, "filter_rounds": int, "seeds": int,
               "block_size": int, "lam": float, "eta": float, "rho": float, "delta_radius": float,
               "aggregation_mode": str}
_DEFAULT_GRIDS = {"sweep-alpha": "0.4,0.3,0.2,0.1", "sweep-scale": "5,10,20,30", "sweep-dim": "20,50"}


def parse_spec_file(path) -> Dict[str, str]:
    """Read ``key = value`` lines; ``#`` starts a comment, blank lines are ignored."""
    out: Dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _float_list(text: str) -> List[float]:
    return [float(v) for v in str(text).split(",") if v.strip()]


def _add_common(p: argparse.ArgumentParser, synth: bool = True, pipe: bool = True) -> None:
    p.add_argument("--spec", help="flat key = value file of defaults")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--out", help="output path")
    p.add_argument("-v", "--verbose", action="store_true")
    if synth:
        p.add_argument("--alpha", type=float, help="inlier fraction (default 0.3)")
        for name, typ in _SYNTH_FLAGS.items():
            p.add_argument("--" + name.replace("_", "-"), type=typ)
    if pipe:
        p.add_argument("--assumed-alpha", type=float, help="alpha given to the estimator (default: --alpha)")
        for name, typ in _PIPE_FLAGS.items():
            p.add_argument("--" + name.replace("_", "-"), type=typ)


def _add_grid(p: argparse.ArgumentParser, grid_default: Optional[str]) -> None:
    p.add_argument("--grid", default=None, help=f"comma-separated grid (default {grid_default})")
    p.add_argument("--reps", type=int, help="replication seeds: seed, seed+1, ... (default 5)")
    p.add_argument("--methods", help="comma-separated subset of " + ",".join(METHODS))
    p.add_argument("--n-test", type=int)
    p.add_argument("--jobs", type=int, help="worker processes (default 1)")
    p.add_argument("--timing", action="store_true", default=None, help="fill the wall_ms column")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="expander-ldr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic contaminated dataset as CSV")
    _add_common(p, pipe=False)

    p = sub.add_parser("fit", help="fit the candidate list on a CSV table, write JSON")
    _add_common(p, synth=False)
    p.add_argument("--alpha", type=float)
    p.add_argument("--data", required=True, help="CSV with header")
    p.add_argument("--response", default="y", help="response column name or index")

    for name, help_ in (("sweep-alpha", "inlier-fraction sweep"), ("sweep-scale", "outlier-scale sweep"),
                        ("sweep-dim", "dimension sweep")):
        p = sub.add_parser(name, help=help_)
        _add_common(p)
        _add_grid(p, _DEFAULT_GRIDS[name])

    p = sub.add_parser("ablate", help="vary one estimator hyperparameter")
    _add_common(p)
    _add_grid(p, None)
    p.add_argument("--param", help="PipelineConfig field to vary")

    p = sub.add_parser("real-mix", help="real-table mixture stress test")
    _add_common(p)
    _add_grid(p, "0.3")
    p.add_argument("--inliers", help="inlier CSV")
    p.add_argument("--outliers", help="outlier CSV")
    p.add_argument("--inlier-response", default="-1")
    p.add_argument("--outlier-response", default="-1")
    p.add_argument("--pca-dim", type=int)

    p = sub.add_parser("audit-expander", help="empirical expansion audit of one sampled graph")
    p.add_argument("--spec")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--n", type=int, help="left vertices (default 5000)")
    p.add_argument("--n-buckets", type=int)
    p.add_argument("--degree", type=int)
    p.add_argument("--max-set-size", type=int, help="default 50")
    p.add_argument("--trials", type=int, help="default 1000")
    return parser


class _Opts:
    """Command-line values layered over a spec file layered over defaults."""

    def __init__(self, args: argparse.Namespace):
        self.args = vars(args)
        self.file = parse_spec_file(args.spec) if getattr(args, "spec", None) else {}
        known = set(self.args) | {"grid", "param"}
        unknown = set(self.file) - known
        if unknown:
            raise ParameterError(f"unknown spec keys: {sorted(unknown)}")

    def get(self, key: str, typ=str, default=None):
        val = self.args.get(key)
        if val is not None:
            return val
        if key in self.file:
            raw = self.file[key]
            if typ is bool:
                return raw.lower() in ("1", "true", "yes", "on")
            return typ(raw)
        return default


def _response(text: str):
    try:
        return int(text)
    except ValueError:
        return text


def _configs(o: _Opts):
    seed = o.get("seed", int, 0)
    synth_kw = {k: o.get(k, t) for k, t in _SYNTH_FLAGS.items() if o.get(k, t) is not None}
    alpha = o.get("alpha", float, 0.3)
    synth = SynthConfig(alpha=alpha, seed=seed, **synth_kw)
    pipe_kw = {k: o.get(k, t) for k, t in _PIPE_FLAGS.items() if o.get(k, t) is not None}
    pipe = PipelineConfig(alpha=o.get("assumed_alpha", float, alpha), master_seed=seed, **pipe_kw)
    return synth, pipe


def _experiment_spec(command: str, o: _Opts) -> ExperimentSpec:
    synth, pipe = _configs(o)
    kind = {"sweep-alpha": "alpha_sweep", "sweep-scale": "scale_sweep", "sweep-dim": "dim_sweep",
            "ablate": "ablation", "real-mix": "real_mixture"}[command]
    grid_text = o.get("grid", str, _DEFAULT_GRIDS.get(command, "0.3" if command == "real-mix" else None))
    if grid_text is None:
        raise ParameterError("ablate needs --grid")
    grid = tuple(int(v) if command == "sweep-dim" else v for v in _float_list(grid_text))
    reps = o.get("reps", int, 5)
    if reps < 1:
        raise ParameterError("--reps must be >= 1")
    default_methods = "expander1,expanderL" if command == "ablate" else ",".join(METHODS)
    methods = tuple(m.strip() for m in o.get("methods", str, default_methods).split(",") if m.strip())
    kw: Dict[str, Any] = {}
    if command == "real-mix":
        # real-data defaults: training size, test size and the milder pruning step
        synth = dataclasses.replace(synth, n=o.get("n", int, 1400))
        pipe = pipe.replace(rho=o.get("rho", float, 0.45))
        kw = dict(inlier_path=o.get("inliers"), outlier_path=o.get("outliers"),
                  inlier_schema=TableSchema(response=_response(o.get("inlier_response", str, "-1"))),
                  outlier_schema=TableSchema(response=_response(o.get("outlier_response", str, "-1"))),
                  pca_dim=o.get("pca_dim", int, 10))
    return ExperimentSpec(
        kind=kind, grid=grid, seeds=tuple(synth.seed + i for i in range(reps)), synth=synth, pipeline=pipe,
        methods=methods, grid_param=o.get("param") if command == "ablate" else None,
        n_test=o.get("n_test", int, 1000 if command == "real-mix" else 2000),
        jobs=o.get("jobs", int, 1), timing=bool(o.get("timing", bool, False)),
        out=o.get("out", str, f"{kind}.csv"), **kw)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(type(obj).__name__)


def _clean_nan(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean_nan(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_clean_nan(v) for v in obj]
    return obj


def _emit(payload: Dict[str, Any], out: Optional[str]) -> None:
    text = json.dumps(_clean_nan(payload), indent=2, default=_json_default, allow_nan=False) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_synth(o: _Opts) -> int:
    synth, _ = _configs(o)
    out = Path(o.get("out", str, "synth.csv"))
    ds = gen_synthetic(synth)
    save_dataset(ds, out)
    out.with_suffix(".wstar.json").write_text(json.dumps({"config": dataclasses.asdict(synth),
                                                         "w_star": ds.w_star.tolist()}, indent=2) + "\n")
    log.info("wrote %s (%d rows, %d inliers)", out, ds.n, int(ds.inlier_mask.sum()))
    return 0


def cmd_fit(o: _Opts) -> int:
    _, pipe = _configs(o)
    data = Path(o.get("data"))
    with data.open() as fh:
        header = [h.strip() for h in fh.readline().split(",")]
    resp = _response(o.get("response", str, "y"))
    feats = [h for i, h in enumerate(header) if h != "inlier" and h != resp and i != resp]
    table = load_table(data, TableSchema(response=resp, features=feats))
    result = run_list(table.X, table.y, pipe)
    payload = candidate_list_to_dict(pipe, result)
    payload["features"] = table.feature_names
    _emit(payload, o.get("out"))
    return 0


def cmd_experiment(command: str, o: _Opts) -> int:
    spec = _experiment_spec(command, o)
    rows = run_experiment(spec)
    out, agg = write_results(rows, spec.out)
    failed = sum(r["status"] != "ok" for r in rows)
    log.info("wrote %s and %s (%d rows, %d failed)", out, agg, len(rows), failed)
    return 0 if failed == 0 else 1


def cmd_audit(o: _Opts) -> int:
    seed = o.get("seed", int, 0)
    graph = sample_expander(o.get("n", int, 5000), o.get("n_buckets", int, 1000), o.get("degree", int, 2),
                            (seed, 0, 0))
    k = o.get("max_set_size", int, 50)
    eps = audit_expansion(graph, k, o.get("trials", int, 1000), (seed, 0, 1))
    loads = graph.bucket_loads()
    _emit({"n_left": graph.n_left, "n_buckets": graph.n_buckets, "degree": graph.degree,
           "max_set_size": k, "epsilon_hat": eps,
           "max_load": int(loads.max()), "mean_load": float(loads.mean())}, o.get("out"))
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        o = _Opts(args)
        if args.command == "synth":
            return cmd_synth(o)
        if args.command == "fit":
            return cmd_fit(o)
        if args.command == "audit-expander":
            return cmd_audit(o)
        return cmd_experiment(args.command, o)
    except (ParameterError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
