"""Strength estimators: per-step least squares, smoothness-penalized LS, and low-pass projection.

All three solve least-squares problems matrix-free with LSQR, which started
from zero converges to the minimum-norm solution. Outputs are block-centered.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, lsqr

from .errors import ConvergenceError, PreconditionError
from .graphseq import (
    ObservationSet,
    StrengthTrajectory,
    center_blocks,
    smoothness_adjoint,
    smoothness_apply,
    smoothness_norm_sq,
    stacked_incidence_adjoint,
    stacked_incidence_apply,
    union_is_connected,
)
from .spectral import project_low_frequency

REGIMES = ("fixed-graph", "evolving", "evolving-with-A3")
METHODS = ("ls", "dls", "dproj")


@dataclass(frozen=True)
class SolverConfig:
    """LSQR settings. ``max_iterations=None`` means ``10 * n * (T + 1)``."""

    rel_tolerance: float = 1e-10
    max_iterations: int | None = None

    def __post_init__(self):
        if not 0 < self.rel_tolerance < 1:
            raise ValueError(f"rel_tolerance must lie in (0, 1), got {self.rel_tolerance}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")

    def iteration_limit(self, n: int, T: int) -> int:
        return self.max_iterations if self.max_iterations is not None else 10 * n * (T + 1)


@dataclass(frozen=True)
class EstimateReport:
    method: str
    trajectory: StrengthTrajectory
    parameter: float | None
    iterations_used: int
    final_residual: float
    stop_reason: int


def _solve(matvec, rmatvec, shape, rhs, cfg: SolverConfig, n: int, T: int):
    op = LinearOperator(shape, matvec=matvec, rmatvec=rmatvec, dtype=float)
    limit = cfg.iteration_limit(n, T)
    tol = cfg.rel_tolerance
    out = lsqr(op, rhs, atol=tol, btol=tol, conlim=0.0, iter_lim=limit)
    x, istop, itn, r1norm = out[0], out[1], out[2], out[3]
    bnorm = float(np.linalg.norm(rhs))
    rel = r1norm / bnorm if bnorm > 0 else 0.0
    if istop == 7:
        raise ConvergenceError(
            f"LSQR hit the iteration limit ({limit}) with relative residual {rel:.3e}",
            residual=rel, iterations=itn)
    return x, int(istop), int(itn), float(rel)


def naive_ls(obs: ObservationSet, cfg: SolverConfig = SolverConfig()) -> EstimateReport:
    """Per-step minimum-norm least squares, ignoring any temporal coupling."""
    g = obs.graph
    n, T = g.n, g.horizon_T
    size = n * (T + 1)
    if g.num_edges == 0 or not np.any(obs.y):
        blocks = np.zeros((T + 1, n))
        return EstimateReport("ls", StrengthTrajectory(blocks), None, 0, 0.0, 0)
    x, istop, itn, rel = _solve(
        lambda v: stacked_incidence_apply(g, v.reshape(T + 1, n)),
        lambda w: stacked_incidence_adjoint(g, w).reshape(-1),
        (g.num_edges, size), obs.y, cfg, n, T)
    traj = StrengthTrajectory(center_blocks(x.reshape(T + 1, n)))
    return EstimateReport("ls", traj, None, itn, rel, istop)


def dls(obs: ObservationSet, lam: float, cfg: SolverConfig = SolverConfig()) -> EstimateReport:
    """Smoothness-penalized least squares ``min ||Q^T z - y||^2 + lam ||E z||^2``.

    Solved as the stacked system ``[Q^T; sqrt(lam) E] z ~ [y; 0]``. Requires a
    connected union graph, which makes the centered minimizer unique.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    g = obs.graph
    if not union_is_connected(g):
        raise PreconditionError("union graph is disconnected; the penalized estimate is not identifiable")
    n, T = g.n, g.horizon_T
    m = g.num_edges
    size = n * (T + 1)
    root = np.sqrt(lam)

    def matvec(v):
        b = v.reshape(T + 1, n)
        return np.concatenate([stacked_incidence_apply(g, b), root * smoothness_apply(b).reshape(-1)])

    def rmatvec(w):
        out = stacked_incidence_adjoint(g, w[:m])
        out += root * smoothness_adjoint(w[m:].reshape(T, n))
        return out.reshape(-1)

    rhs = np.concatenate([obs.y, np.zeros(T * n)])
    if not np.any(rhs):
        return EstimateReport("dls", StrengthTrajectory(np.zeros((T + 1, n))), float(lam), 0, 0.0, 0)
    x, istop, itn, rel = _solve(matvec, rmatvec, (m + T * n, size), rhs, cfg, n, T)
    traj = StrengthTrajectory(center_blocks(x.reshape(T + 1, n)))
    return EstimateReport("dls", traj, float(lam), itn, rel, istop)


def dproj(obs: ObservationSet, tau: float, cfg: SolverConfig = SolverConfig()) -> EstimateReport:
    """Per-step least squares followed by projection onto the low-frequency space below ``tau``."""
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    first = naive_ls(obs, cfg)
    traj = project_low_frequency(first.trajectory, tau).centered()
    return EstimateReport("dproj", traj, float(tau), first.iterations_used,
                          first.final_residual, first.stop_reason)


def estimate(obs: ObservationSet, method: str, parameter: float | None = None,
             cfg: SolverConfig = SolverConfig()) -> EstimateReport:
    if method == "ls":
        return naive_ls(obs, cfg)
    if method == "dls":
        return dls(obs, parameter, cfg)
    if method == "dproj":
        return dproj(obs, parameter, cfg)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def dls_objective(obs: ObservationSet, z, lam: float) -> float:
    r = stacked_incidence_apply(obs.graph, z) - obs.y
    return float(r @ r + lam * smoothness_norm_sq(z))


def choose_lambda(T: int, S_T: float, regime: str = "evolving") -> float:
    """Penalty weight from the error-rate analysis.

    ``(T/S_T)^(2/3)`` when the graph is fixed over time or the lower-bound
    condition on evolving graphs holds; ``(T/S_T)^(2/5)`` for arbitrary
    evolving sequences of connected graphs.
    """
    if T < 1 or not S_T > 0:
        raise ValueError(f"need T >= 1 and S_T > 0, got T={T}, S_T={S_T}")
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}; expected one of {REGIMES}")
    exponent = 2.0 / 5.0 if regime == "evolving" else 2.0 / 3.0
    return float((T / S_T) ** exponent)


def choose_tau(T: int, S_T: float) -> float:
    """Projection threshold ``(S_T / T)^(2/3)``."""
    if T < 1 or not S_T > 0:
        raise ValueError(f"need T >= 1 and S_T > 0, got T={T}, S_T={S_T}")
    return float((S_T / T) ** (2.0 / 3.0))


def auto_parameter(method: str, T: int, S_T: float, regime: str = "evolving") -> float | None:
    if method == "dls":
        return choose_lambda(T, S_T, regime)
    if method == "dproj":
        return choose_tau(T, S_T)
    return None
