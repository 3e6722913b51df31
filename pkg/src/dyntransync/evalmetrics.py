"""Error metrics, the Monte Carlo rate harness, and hold-out cross-validation."""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DimensionError, DynTranSyncError, PreconditionError
from .estimators import METHODS, SolverConfig, auto_parameter, estimate
from .graphseq import (
    ObservationSet,
    StrengthTrajectory,
    all_steps_connected,
    as_blocks,
    center_blocks,
    stacked_incidence_apply,
    union_is_connected,
)
from .synth import SynthConfig, generate_instance, substream

log = logging.getLogger(__name__)

RESULT_COLUMNS = ("T", "estimator", "parameter", "mean_mse", "std_mse", "trials", "failures",
                  "disconnected_trials")

STREAM_CV = 6
MAX_CV_REDRAWS = 20


# -- metrics ----------------------------------------------------------------

def trajectory_mse(est, truth) -> float:
    """``(1/(T+1)) sum_k ||est_k - truth_k||^2`` after centering both blocks."""
    a, b = as_blocks(est), as_blocks(truth)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    d = center_blocks(a) - center_blocks(b)
    return float(np.sum(d * d) / a.shape[0])


def _predicted(obs: ObservationSet, est) -> np.ndarray:
    b = as_blocks(est)
    if b.shape != (obs.graph.num_steps, obs.graph.n):
        raise DimensionError(f"estimate shape {b.shape} does not match observations "
                             f"({obs.graph.num_steps}, {obs.graph.n})")
    return stacked_incidence_apply(obs.graph, b)


def pairwise_mse(obs: ObservationSet, est) -> float:
    """Squared prediction error of the observed differences, summed and divided by ``T + 1``."""
    r = obs.y - _predicted(obs, est)
    return float(r @ r / obs.graph.num_steps)


class UpsetCount(NamedTuple):
    count: int
    total: int

    @property
    def rate(self) -> float:
        return self.count / self.total if self.total else 0.0


def upsets(obs: ObservationSet, est) -> UpsetCount:
    """Edges where ``sign(y)`` differs from the sign of the estimated difference.

    A zero estimated difference against a nonzero observation is an upset; a
    zero observation matched by a zero difference is not.
    """
    mismatch = np.sign(obs.y) != np.sign(_predicted(obs, est))
    return UpsetCount(int(mismatch.sum()), obs.graph.num_edges)


# -- Monte Carlo rate harness ---------------------------------------------------

@dataclass(frozen=True)
class EstimatorSpec:
    """One estimator column of a benchmark. ``parameter=None`` applies the automatic rule."""

    method: str
    parameter: float | None = None
    regime: str = "evolving"
    label: str | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    @property
    def name(self) -> str:
        return self.label or self.method

    def resolve(self, T: int, S_T: float) -> float | None:
        if self.method == "ls":
            return None
        if self.parameter is not None:
            return float(self.parameter)
        return auto_parameter(self.method, T, S_T, self.regime)


@dataclass(frozen=True)
class ResultRow:
    T: int
    estimator: str
    parameter: float | None
    mean_mse: float
    std_mse: float
    trials: int
    failures: int
    disconnected_trials: int


@dataclass
class ResultTable:
    rows: list[ResultRow]
    metadata: dict = field(default_factory=dict)

    def series(self, estimator: str) -> tuple[np.ndarray, np.ndarray]:
        """``(T values, mean MSE)`` for one estimator, sorted by ``T``."""
        rows = sorted((r for r in self.rows if r.estimator == estimator), key=lambda r: r.T)
        return np.array([r.T for r in rows], dtype=float), np.array([r.mean_mse for r in rows])

    def loglog_slope(self, estimator: str) -> float:
        Ts, mse = self.series(estimator)
        return float(np.polyfit(np.log(Ts), np.log(mse), 1)[0])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for r in self.rows:
            writer.writerow([r.T, r.estimator, "" if r.parameter is None else repr(r.parameter),
                             repr(r.mean_mse), repr(r.std_mse), r.trials, r.failures,
                             r.disconnected_trials])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"metadata": self.metadata, "rows": [asdict(r) for r in self.rows]},
                          indent=2, sort_keys=True)


def trial_seed(master_seed: int, T: int) -> int:
    """Seed for all trials at horizon ``T``; trials are then separated by their index."""
    return int(np.random.SeedSequence(master_seed, spawn_key=(T,)).generate_state(1, np.uint64)[0])


def _run_trial(args):
    cfg, trial, specs, solver = args
    inst = generate_instance(cfg, trial)
    disconnected = not all_steps_connected(inst.graph)
    out = []
    for spec in specs:
        param = spec.resolve(cfg.horizon_T, cfg.smoothness)
        try:
            rep = estimate(inst.observations, spec.method, param, solver)
        except DynTranSyncError as exc:
            log.warning("T=%d trial %d %s failed: %s", cfg.horizon_T, trial, spec.name, exc)
            out.append(None)
            continue
        out.append(trajectory_mse(rep.trajectory, inst.truth))
    return out, disconnected


def rate_experiment(base: SynthConfig, T_grid: Sequence[int], trials: int,
                    estimators: Sequence[EstimatorSpec], master_seed: int = 0,
                    threads: int = 1, solver: SolverConfig = SolverConfig(),
                    smoothness_power: float = 0.0) -> ResultTable:
    """Mean and standard deviation of the trajectory MSE over seeded trials, for each ``T``.

    The smoothness budget at horizon ``T`` is ``base.smoothness * T**smoothness_power``
    (e.g. ``-1`` for ``S_T = 1/T``). All estimators in a trial see the same data.
    A trial whose estimator raises is counted as a failure and excluded from
    that estimator's mean.
    """
    if not T_grid:
        raise ValueError("T grid is empty")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    names = [s.name for s in estimators]
    if len(set(names)) != len(names):
        raise ValueError(f"estimator labels must be unique, got {names}")

    def budget(T):
        return base.smoothness * float(T) ** smoothness_power

    jobs = []
    for T in T_grid:
        cfg = replace(base, horizon_T=int(T), seed=trial_seed(master_seed, int(T)),
                      smoothness=budget(T))
        jobs.extend((cfg, m, tuple(estimators), solver) for m in range(trials))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_trial, jobs))
    else:
        results = [_run_trial(j) for j in jobs]

    rows = []
    for t_idx, T in enumerate(T_grid):
        chunk = results[t_idx * trials:(t_idx + 1) * trials]
        disconnected = sum(flag for _, flag in chunk)
        for e_idx, spec in enumerate(estimators):
            vals = np.array([r[e_idx] for r, _ in chunk if r[e_idx] is not None])
            std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
            rows.append(ResultRow(
                T=int(T), estimator=spec.name,
                parameter=spec.resolve(int(T), budget(T)),
                mean_mse=float(vals.mean()) if vals.size else float("nan"),
                std_mse=std, trials=trials, failures=trials - int(vals.size),
                disconnected_trials=int(disconnected)))
    meta = {
        "n": base.n, "S_T": base.smoothness, "S_T_power": smoothness_power, "sigma": base.noise_sigma,
        "edge_probability": _describe_probability(base.edge_probability),
        "connect_each_step": base.connect_each_step, "btl_trials": base.btl_trials,
        "master_seed": master_seed, "trials": trials,
    }
    return ResultTable(rows, meta)


def _describe_probability(p) -> str:
    if np.isscalar(p):
        return f"constant:{float(p)!r}"
    if isinstance(p, tuple) and len(p) == 2:
        return f"uniform:{float(p[0])!r}:{float(p[1])!r}"
    return "per-step:" + ",".join(repr(float(v)) for v in p)


# -- cross-validation -------------------------------------------------------

@dataclass(frozen=True)
class CvReport:
    method: str
    criterion: str
    grid: tuple[float, ...]
    mean_errors: tuple[float, ...]
    selected: float
    repeats_used: int
    repeats_skipped: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def _holdout_error(test: ObservationSet, est: StrengthTrajectory, criterion: str) -> float:
    if criterion == "mse":
        return pairwise_mse(test, est)
    return upsets(test, est).count / test.graph.num_steps


def cross_validate(obs: ObservationSet, method: str, grid: Sequence[float], criterion: str = "mse",
                   repeats: int = 10, seed: int = 0, solver: SolverConfig = SolverConfig()) -> CvReport:
    """Select a penalty or threshold by holding out one random edge per step.

    Each repeat draws one held-out edge per step, fits every grid value on the
    remaining edges and scores the held-out ones. Errors are averaged over the
    repeats; the grid value with the smallest mean wins, ties going to the
    smaller value. For ``dls``, splits that disconnect the union graph are
    redrawn up to 20 times, then the repeat is skipped.
    """
    if method not in ("dls", "dproj"):
        raise ValueError(f"cross-validation needs method 'dls' or 'dproj', got {method!r}")
    if criterion not in ("mse", "upsets"):
        raise ValueError(f"criterion must be 'mse' or 'upsets', got {criterion!r}")
    grid = tuple(float(v) for v in grid)
    if not grid:
        raise ValueError("parameter grid is empty")
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    g = obs.graph
    if np.any(g.edge_counts == 0):
        empty = np.flatnonzero(g.edge_counts == 0).tolist()
        raise PreconditionError(f"steps {empty} have no observations to hold out")

    totals = np.zeros(len(grid))
    used = skipped = 0
    for r in range(repeats):
        rng = substream(seed, r, STREAM_CV)
        for _ in range(MAX_CV_REDRAWS):
            held = {k: int(rng.integers(g.edge_counts[k])) for k in range(g.num_steps)}
            train = obs.drop(held)
            if method != "dls" or union_is_connected(train.graph):
                break
        else:
            log.warning("repeat %d: every split disconnected the union graph; skipped", r)
            skipped += 1
            continue
        test = ObservationSet.from_records(g.n, g.horizon_T, [
            (k, *g.edges[k][idx].tolist(), obs.values[k][idx]) for k, idx in held.items()])
        for k in range(g.num_steps):
            i, j = test.graph.edges[k][0]
            hit = np.all(train.graph.edges[k] == (i, j), axis=1)
            assert not hit.any(), "held-out edge leaked into the training set"
        for p_idx, param in enumerate(grid):
            est = estimate(train, method, param, solver).trajectory
            totals[p_idx] += _holdout_error(test, est, criterion)
        used += 1
    if used == 0:
        raise DynTranSyncError("no cross-validation repeat could be evaluated")
    means = totals / used
    best = min(range(len(grid)), key=lambda i: (means[i], grid[i]))
    return CvReport(method, criterion, grid, tuple(float(m) for m in means), grid[best], used, skipped)
