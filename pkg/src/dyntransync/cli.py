"""Command-line entry point: ``dyntransync {synth,estimate,bench,cv,ingest,diagnose}``.

Configs are YAML (JSON is accepted too). Every command writes a
``manifest.json`` with the resolved config, its SHA-256 hash, the seed and the
package version. Exit codes: 0 success, 2 config error, 3 I/O error,
4 estimator precondition or convergence failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .diagnostics import (
    SIZE_CAP,
    assumption3_margin,
    fiedler_value,
    lambda_min_L,
    norm_L,
    nullspace_rank_check,
)
from .errors import DimensionError, DynTranSyncError
from .estimators import REGIMES, SolverConfig, auto_parameter, estimate
from .evalmetrics import EstimatorSpec, cross_validate, rate_experiment, trajectory_mse
from .formats import (
    dumps,
    graph_to_dict,
    load_observations,
    load_trajectory,
    observations_to_csv,
    observations_to_dict,
    trajectory_to_dict,
    write_text,
)
from .graphseq import union_is_connected
from .ingest import (
    build_observations_matches,
    build_observations_ratings,
    items_to_csv,
    plan_fixed_width,
    plan_merge_until_connected,
    read_matches_csv,
    read_ratings_csv,
    window_connectivity,
)
from .synth import SynthConfig, generate_instance

log = logging.getLogger("dyntransync")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_ESTIMATOR = 0, 2, 3, 4


class ConfigError(Exception):
    pass


# -- config helpers ---------------------------------------------------------------

def load_config(path) -> dict:
    if path is None:
        return {}
    text = Path(path).read_text(encoding="utf-8")
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if cfg is None:
        return {}
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping at the top level")
    return cfg


def _field(cfg: dict, name: str, kind, default=...):
    if name not in cfg or cfg[name] is None:
        if default is ...:
            raise ConfigError(f"missing required field '{name}'")
        return default
    value = cfg[name]
    try:
        if kind is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"field '{name}' must be {kind.__name__}, got {value!r}") from None


def _edge_probability(value):
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, dict) and set(value) == {"uniform"}:
        lo, hi = value["uniform"]
        return (float(lo), float(hi))
    if isinstance(value, list):
        return [float(v) for v in value]
    raise ConfigError(f"field 'edge_probability' must be a number, a list or {{uniform: [lo, hi]}}; "
                      f"got {value!r}")


def _synth_config(cfg: dict, seed_override) -> SynthConfig:
    try:
        return SynthConfig(
            n=_field(cfg, "n", int),
            horizon_T=_field(cfg, "T", int),
            smoothness=_field(cfg, "S_T", float),
            noise_sigma=_field(cfg, "sigma", float, 1.0),
            edge_probability=_edge_probability(cfg.get("edge_probability", 0.5)),
            seed=seed_override if seed_override is not None else _field(cfg, "seed", int, 0),
            btl_trials=_field(cfg, "btl_trials", int, None),
            connect_each_step=_field(cfg, "connect_each_step", bool, False),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _solver(cfg: dict, args) -> SolverConfig:
    tol = args.rel_tol if getattr(args, "rel_tol", None) is not None else _field(cfg, "rel_tolerance", float, 1e-10)
    max_it = getattr(args, "max_iter", None)
    if max_it is None:
        max_it = _field(cfg, "max_iterations", int, None)
    try:
        return SolverConfig(tol, max_it)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _write_manifest(out: Path, command: str, config: dict, seed, extra: dict | None = None) -> None:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    manifest = {
        "command": command,
        "config": json.loads(canonical),
        "config_hash": hashlib.sha256(canonical.encode()).hexdigest(),
        "seed": seed,
        "version": __version__,
    }
    if extra:
        manifest.update(extra)
    write_text(out / "manifest.json", dumps(manifest))


def _outdir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- commands ---------------------------------------------------------------------

def run_synth(args) -> int:
    cfg = load_config(args.config)
    scfg = _synth_config(cfg, args.seed)
    trial = _field(cfg, "trial", int, 0)
    out = _outdir(args)
    inst = generate_instance(scfg, trial)
    write_text(out / "graphs.json", dumps(graph_to_dict(inst.graph)))
    write_text(out / "truth.json", dumps(trajectory_to_dict(inst.truth)))
    write_text(out / "observations.json", dumps(observations_to_dict(inst.observations)))
    resolved = {**cfg, "seed": scfg.seed}
    _write_manifest(out, "synth", resolved, scfg.seed,
                    {"union_connected": union_is_connected(inst.graph)})
    return EXIT_OK


def run_estimate(args) -> int:
    cfg = load_config(args.config)
    obs_path = args.observations or cfg.get("observations")
    if obs_path is None:
        raise ConfigError("missing required field 'observations'")
    method = args.method or _field(cfg, "method", str, "dls")
    if method not in ("ls", "dls", "dproj"):
        raise ConfigError(f"field 'method' must be one of ls, dls, dproj; got {method!r}")
    param = args.param if args.param is not None else cfg.get("parameter", "auto")
    regime = args.regime or _field(cfg, "regime", str, "evolving")
    if regime not in REGIMES:
        raise ConfigError(f"field 'regime' must be one of {REGIMES}; got {regime!r}")
    smoothness = args.smoothness if args.smoothness is not None else _field(cfg, "S_T", float, None)
    solver = _solver(cfg, args)

    obs = load_observations(obs_path)
    if method == "ls":
        value = None
    elif str(param) == "auto":
        if smoothness is None:
            raise ConfigError("parameter 'auto' requires field 'S_T'")
        value = auto_parameter(method, obs.graph.horizon_T, smoothness, regime)
    else:
        try:
            value = float(param)
        except ValueError:
            raise ConfigError(f"field 'parameter' must be a number or 'auto', got {param!r}") from None

    start = time.perf_counter()
    rep = estimate(obs, method, value, solver)
    wall = time.perf_counter() - start

    out = _outdir(args)
    write_text(out / "trajectory.json", dumps(trajectory_to_dict(rep.trajectory)))
    report = {
        "method": method, "parameter": rep.parameter, "regime": regime if method == "dls" else None,
        "iterations": rep.iterations_used, "relative_residual": rep.final_residual,
        "stop_reason": rep.stop_reason, "wall_time_s": wall,
    }
    truth_path = args.truth or cfg.get("truth")
    if truth_path:
        report["trajectory_mse"] = trajectory_mse(rep.trajectory, load_trajectory(truth_path))
    write_text(out / "report.json", dumps(report))
    resolved = {"observations": str(obs_path), "method": method, "parameter": param, "regime": regime,
                "S_T": smoothness, "rel_tolerance": solver.rel_tolerance,
                "max_iterations": solver.max_iterations, "truth": truth_path}
    _write_manifest(out, "estimate", resolved, None)
    return EXIT_OK


DEFAULT_BENCH_ESTIMATORS = [
    {"method": "dls", "regime": "evolving-with-A3"},
    {"method": "dproj"},
]


def _estimator_specs(cfg: dict) -> list[EstimatorSpec]:
    raw = cfg.get("estimators", DEFAULT_BENCH_ESTIMATORS)
    if not isinstance(raw, list) or not raw:
        raise ConfigError("field 'estimators' must be a non-empty list")
    specs = []
    for entry in raw:
        if isinstance(entry, str):
            entry = {"method": entry}
        try:
            specs.append(EstimatorSpec(
                method=_field(entry, "method", str),
                parameter=_field(entry, "parameter", float, None),
                regime=_field(entry, "regime", str, "evolving"),
                label=_field(entry, "label", str, None)))
        except ValueError as exc:
            raise ConfigError(f"estimators: {exc}") from exc
    return specs


def run_bench(args) -> int:
    cfg = load_config(args.config)
    # the horizon is overridden per grid point
    base = _synth_config({**cfg, "T": 1}, args.seed)
    grid = cfg.get("T_grid")
    if not isinstance(grid, list) or not grid:
        raise ConfigError("missing required field 'T_grid' (non-empty list)")
    grid = [int(t) for t in grid]
    trials = _field(cfg, "trials", int, 20)
    power = _field(cfg, "S_T_power", float, 0.0)
    specs = _estimator_specs(cfg)
    table = rate_experiment(base, grid, trials, specs, master_seed=base.seed,
                            threads=args.threads, solver=_solver(cfg, args),
                            smoothness_power=power)
    out = _outdir(args)
    write_text(out / "results.csv", table.to_csv())
    write_text(out / "results.json", table.to_json() + "\n")
    _write_manifest(out, "bench", {**cfg, "seed": base.seed}, base.seed)
    return EXIT_OK


def _grid(cfg: dict) -> list[float]:
    grid = cfg.get("grid")
    if isinstance(grid, dict) and set(grid) == {"logspace"}:
        lo, hi, num = grid["logspace"]
        return [float(v) for v in np.logspace(float(lo), float(hi), int(num))]
    if isinstance(grid, list) and grid:
        return [float(v) for v in grid]
    raise ConfigError("missing required field 'grid' (list or {logspace: [lo, hi, num]})")


def run_cv(args) -> int:
    cfg = load_config(args.config)
    obs_path = args.observations or cfg.get("observations")
    if obs_path is None:
        raise ConfigError("missing required field 'observations'")
    method = _field(cfg, "method", str, "dls")
    criterion = _field(cfg, "criterion", str, "mse")
    repeats = _field(cfg, "repeats", int, 10)
    seed = args.seed if args.seed is not None else _field(cfg, "seed", int, 0)
    grid = _grid(cfg)
    obs = load_observations(obs_path)
    try:
        report = cross_validate(obs, method, grid, criterion, repeats, seed, _solver(cfg, args))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = _outdir(args)
    write_text(out / "cv_report.json", report.to_json() + "\n")
    _write_manifest(out, "cv", {**cfg, "observations": str(obs_path), "seed": seed}, seed)
    return EXIT_OK


def run_ingest(args) -> int:
    cfg = load_config(args.config)
    kind = _field(cfg, "kind", str)
    src = args.input or cfg.get("input")
    if src is None:
        raise ConfigError("missing required field 'input'")
    text = Path(src).read_text(encoding="utf-8")
    if kind == "ratings":
        records = read_ratings_csv(text, _field(cfg, "top_n", int, None))
    elif kind == "matches":
        records = read_matches_csv(text)
    else:
        raise ConfigError(f"field 'kind' must be 'ratings' or 'matches', got {kind!r}")
    if not records:
        raise ConfigError(f"no records in {src}")
    width = _field(cfg, "window_width", int, None)
    if width is not None:
        plan = plan_fixed_width(records, width)
    elif kind == "ratings":
        plan = plan_merge_until_connected(records)
    else:
        raise ConfigError("match data needs field 'window_width'")
    build = build_observations_ratings if kind == "ratings" else build_observations_matches
    result = build(records, plan)
    out = _outdir(args)
    write_text(out / "observations.json", dumps(observations_to_dict(result.observations)))
    write_text(out / "observations.csv", observations_to_csv(result.observations))
    write_text(out / "items.csv", items_to_csv(result.items))
    write_text(out / "plan.json", dumps({
        "groups": [list(g) for g in plan.groups],
        "window_connected": window_connectivity(result),
        "union_connected": union_is_connected(result.graph),
    }))
    _write_manifest(out, "ingest", {**cfg, "input": str(src)}, None)
    return EXIT_OK


def run_diagnose(args) -> int:
    cfg = load_config(args.config)
    obs_path = args.observations or cfg.get("observations")
    if obs_path is None:
        raise ConfigError("missing required field 'observations'")
    lam = _field(cfg, "lambda", float, 1.0)
    kappas = [float(k) for k in cfg.get("kappas", [1.1, 2.0, 10.0])]
    g = load_observations(obs_path).graph
    fied = [fiedler_value(g, k) for k in range(g.num_steps)]
    lmin = lambda_min_L(g)
    report = {
        "n": g.n, "T": g.horizon_T,
        "union_connected": union_is_connected(g),
        "fiedler_values": [f.value for f in fied],
        "step_connected": [f.connected for f in fied],
        "lambda_min_L": lmin.value, "all_steps_connected": lmin.connected,
        "norm_L": norm_L(g), "lambda": lam,
    }
    if g.n * g.num_steps <= SIZE_CAP:
        chk = nullspace_rank_check(g, lam)
        report["nullspace"] = {"rank": chk.rank, "expected_rank": chk.expected_rank, "pass": chk.passed}
        report["assumption3_margin"] = {repr(k): assumption3_margin(g, lam, k) for k in kappas}
    else:
        report["nullspace"] = None
        report["assumption3_margin"] = None
        report["skipped"] = f"dense checks need n(T+1) <= {SIZE_CAP}"
    out = _outdir(args)
    write_text(out / "diagnose.json", dumps(report))
    _write_manifest(out, "diagnose", {**cfg, "observations": str(obs_path)}, None)
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML/JSON config file")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--threads", type=int, default=1,
                        help="worker processes for Monte Carlo fan-out (1 = reference mode)")
    common.add_argument("--out-dir", default=".", help="output directory (default: .)")
    common.add_argument("--rel-tol", type=float, default=None, help="LSQR tolerance (default 1e-10)")
    common.add_argument("--max-iter", type=int, default=None,
                        help="LSQR iteration cap (default 10*n*(T+1))")

    parser = argparse.ArgumentParser(prog="dyntransync", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common],
                       help="generate truth, graphs and observations",
                       description="Config fields: n, T, S_T (required); sigma=1.0, "
                                   "edge_probability=0.5 (number | list | {uniform: [lo, hi]}), "
                                   "seed=0, btl_trials, connect_each_step=false, trial=0.")
    p.set_defaults(func=run_synth)

    p = sub.add_parser("estimate", parents=[common], help="run ls / dls / dproj on observations",
                       description="Config fields: observations, method=dls, parameter=auto, "
                                   "regime=evolving, S_T (needed for auto), truth (optional).")
    p.add_argument("observations", nargs="?", help="observations .json or .csv")
    p.add_argument("--method", choices=["ls", "dls", "dproj"])
    p.add_argument("--param", help="lambda / tau value, or 'auto'")
    p.add_argument("--smoothness", type=float, help="S_T for the automatic parameter rules")
    p.add_argument("--regime", choices=list(REGIMES))
    p.add_argument("--truth", help="truth trajectory .json; adds trajectory_mse to the report")
    p.set_defaults(func=run_estimate)

    p = sub.add_parser("bench", parents=[common], help="Monte Carlo MSE-versus-T table",
                       description="Config fields: n, S_T, T_grid (required); S_T_power=0, "
                                   "sigma=1.0, edge_probability, connect_each_step, btl_trials, "
                                   "trials=20, seed=0, estimators (list of {method, parameter, "
                                   "regime, label}; default dls with the 2/3 rule and dproj).")
    p.set_defaults(func=run_bench)

    p = sub.add_parser("cv", parents=[common], help="hold-out cross-validation of lambda or tau",
                       description="Config fields: observations, grid (required); method=dls, "
                                   "criterion=mse, repeats=10, seed=0.")
    p.add_argument("observations", nargs="?")
    p.set_defaults(func=run_cv)

    p = sub.add_parser("ingest", parents=[common], help="convert ratings or match CSV to observations",
                       description="Config fields: kind (ratings|matches), input; top_n, "
                                   "window_width (required for matches).")
    p.add_argument("input", nargs="?")
    p.set_defaults(func=run_ingest)

    p = sub.add_parser("diagnose", parents=[common], help="spectral diagnostics as JSON",
                       description="Config fields: observations; lambda=1.0, kappas=[1.1, 2, 10].")
    p.add_argument("observations", nargs="?")
    p.set_defaults(func=run_diagnose)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DimensionError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DynTranSyncError as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATOR
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
