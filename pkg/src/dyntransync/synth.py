"""Synthetic ground truths, Erdos-Renyi graph sequences and noisy observations.

Randomness contract: every draw comes from a PCG64 generator seeded with
``SeedSequence(seed, spawn_key=(trial, stream, *extra))``. Streams are fixed
integers (see ``STREAM_*``), so a trial's truth, graphs and noise do not depend
on which other trials were run or in which order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import DimensionError
from .graphseq import (
    GraphSequence,
    ObservationSet,
    StrengthTrajectory,
    _components,
    center_blocks,
    smoothness_norm_sq,
)
from .spectral import SpectralBasis, project_low_frequency, spectral_basis

log = logging.getLogger(__name__)

STREAM_TRUTH = 0
STREAM_PROBABILITY = 1
STREAM_GRAPH = 2
STREAM_REPAIR = 3
STREAM_NOISE = 4
STREAM_BTL = 5

MAX_RESAMPLES = 100

# a float, a (low, high) range drawn uniformly per step, or one value per step
EdgeProbability = Union[float, tuple[float, float], Sequence[float]]


def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(key))))


@dataclass(frozen=True)
class SynthConfig:
    n: int
    horizon_T: int
    smoothness: float
    noise_sigma: float = 1.0
    edge_probability: EdgeProbability = 0.5
    seed: int = 0
    btl_trials: int | None = None
    connect_each_step: bool = False

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if self.horizon_T < 1:
            raise ValueError(f"horizon_T must be >= 1, got {self.horizon_T}")
        if not self.smoothness > 0:
            raise ValueError(f"smoothness must be positive, got {self.smoothness}")
        if not self.noise_sigma >= 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.btl_trials is not None and self.btl_trials < 1:
            raise ValueError(f"btl_trials must be >= 1, got {self.btl_trials}")
        p = self.edge_probability
        values = [p] if np.isscalar(p) else list(p)
        if not all(0 <= float(v) <= 1 for v in values):
            raise ValueError(f"edge probabilities must lie in [0, 1], got {p}")
        if not np.isscalar(p) and not (isinstance(p, tuple) and len(p) == 2) \
                and len(values) != self.horizon_T + 1:
            raise ValueError("a per-step probability list needs horizon_T + 1 entries")


def generation_threshold(T: int, n: int, S_T: float) -> float:
    """Low-pass threshold for the ground truth: ``min(S_T, (pi S_T / ((T+1) sqrt(n-1)))^(2/3))``."""
    band = (math.pi * S_T / ((T + 1) * math.sqrt(n - 1))) ** (2.0 / 3.0)
    return min(S_T, band)


def generate_ground_truth(cfg: SynthConfig, basis: SpectralBasis | None = None,
                          trial: int = 0) -> StrengthTrajectory:
    """Unit Gaussian direction, low-pass filtered and block-centered.

    The result satisfies ``||E z*||^2 <= S_T`` (checked) and ``||z*|| <= 1``.
    """
    n, T = cfg.n, cfg.horizon_T
    basis = basis or spectral_basis(T, n)
    z = substream(cfg.seed, trial, STREAM_TRUTH).standard_normal((T + 1, n))
    z /= np.linalg.norm(z)
    eps = generation_threshold(T, n, cfg.smoothness)
    truth = center_blocks(project_low_frequency(z, eps, basis))
    budget = smoothness_norm_sq(truth)
    if budget > cfg.smoothness:
        raise AssertionError(f"ground truth violates smoothness budget: {budget} > {cfg.smoothness}")
    return StrengthTrajectory(truth)


def edge_probabilities(cfg: SynthConfig, trial: int = 0) -> np.ndarray:
    p = cfg.edge_probability
    steps = cfg.horizon_T + 1
    if np.isscalar(p):
        return np.full(steps, float(p))
    if isinstance(p, tuple) and len(p) == 2:
        lo, hi = float(p[0]), float(p[1])
        return substream(cfg.seed, trial, STREAM_PROBABILITY).uniform(lo, hi, size=steps)
    return np.asarray(p, dtype=float)


def _draw_step(n: int, p: float, rng: np.random.Generator) -> np.ndarray:
    iu, ju = np.triu_indices(n, 1)
    mask = rng.random(iu.size) < p
    return np.stack([iu[mask], ju[mask]], axis=1)


def _spanning_repair(n: int, labels: np.ndarray, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Edges of a random spanning tree over the components given by ``labels``."""
    comps = [np.flatnonzero(labels == c) for c in range(labels.max() + 1)]
    order = rng.permutation(len(comps))
    added = []
    for idx in range(1, len(order)):
        a = comps[order[idx]]
        b = comps[order[rng.integers(idx)]]
        i, j = int(rng.choice(a)), int(rng.choice(b))
        added.append((min(i, j), max(i, j)))
    return added


def _with_edges(edges: np.ndarray, extra: list[tuple[int, int]]) -> np.ndarray:
    if not extra:
        return edges
    return np.concatenate([edges, np.array(extra, dtype=np.int64).reshape(-1, 2)])


def generate_er_sequence(cfg: SynthConfig, trial: int = 0) -> GraphSequence:
    """Independent ``G(n, p_k)`` graphs with a connected union graph.

    The whole sequence is redrawn up to 100 times; if the union is still
    disconnected, a random spanning tree over its components is added, each
    repair edge at a uniformly random step. With ``connect_each_step`` every
    step is redrawn (and, failing that, repaired) until it is connected itself.
    """
    n, steps = cfg.n, cfg.horizon_T + 1
    probs = edge_probabilities(cfg, trial)
    repair_rng = substream(cfg.seed, trial, STREAM_REPAIR)

    if cfg.connect_each_step:
        edges = []
        for k in range(steps):
            for attempt in range(MAX_RESAMPLES):
                e = _draw_step(n, probs[k], substream(cfg.seed, trial, STREAM_GRAPH, attempt, k))
                ncomp, labels = _components(n, e)
                if ncomp == 1:
                    break
            else:
                log.warning("step %d still disconnected after %d draws; adding spanning repair edges",
                            k, MAX_RESAMPLES)
                e = _with_edges(e, _spanning_repair(n, labels, repair_rng))
            edges.append(e)
        return GraphSequence(n, cfg.horizon_T, tuple(edges))

    for attempt in range(MAX_RESAMPLES):
        edges = [_draw_step(n, probs[k], substream(cfg.seed, trial, STREAM_GRAPH, attempt, k))
                 for k in range(steps)]
        union = np.concatenate(edges) if sum(len(e) for e in edges) else np.zeros((0, 2), np.int64)
        ncomp, labels = _components(n, union)
        if ncomp == 1:
            return GraphSequence(n, cfg.horizon_T, tuple(edges))

    log.warning("union graph disconnected after %d draws; adding %d spanning repair edges",
                MAX_RESAMPLES, ncomp - 1)
    for pair in _spanning_repair(n, labels, repair_rng):
        k = int(repair_rng.integers(steps))
        edges[k] = _with_edges(edges[k], [pair])
    return GraphSequence(n, cfg.horizon_T, tuple(edges))


def _check_shapes(z: np.ndarray, g: GraphSequence) -> None:
    if z.shape != (g.num_steps, g.n):
        raise DimensionError(f"trajectory shape {z.shape} does not match graph ({g.num_steps}, {g.n})")


def noiseless_observations(z, g: GraphSequence) -> ObservationSet:
    b = z.blocks if isinstance(z, StrengthTrajectory) else np.asarray(z, dtype=float)
    _check_shapes(b, g)
    return ObservationSet(g, tuple(b[k, e[:, 0]] - b[k, e[:, 1]] for k, e in enumerate(g.edges)))


def generate_observations(z, g: GraphSequence, sigma: float, seed: int,
                          trial: int = 0) -> ObservationSet:
    """``y_ij(k) = z_{k,i} - z_{k,j} + sigma * xi`` with i.i.d. standard normal ``xi``."""
    if not sigma >= 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    clean = noiseless_observations(z, g)
    if sigma == 0:
        return clean
    noise = substream(seed, trial, STREAM_NOISE).standard_normal(g.num_edges) * sigma
    off = g.offsets
    return ObservationSet(g, tuple(v + noise[off[k]:off[k + 1]] for k, v in enumerate(clean.values)))


def btl_log_odds(wins, trials):
    """Smoothed log-odds ``ln((wins + 1/2) / (trials - wins + 1/2))``."""
    wins = np.asarray(wins, dtype=float)
    return np.log((wins + 0.5) / (trials - wins + 0.5))


def generate_btl_observations(w, g: GraphSequence, trials: int, seed: int,
                              trial: int = 0) -> ObservationSet:
    """Log-odds of ``trials`` Bernoulli comparisons per edge, ``P(i beats j) = w_i / (w_i + w_j)``."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    b = w.blocks if isinstance(w, StrengthTrajectory) else np.asarray(w, dtype=float)
    _check_shapes(b, g)
    if np.any(b <= 0):
        raise ValueError("BTL strengths must be positive")
    rng = substream(seed, trial, STREAM_BTL)
    values = []
    for k, e in enumerate(g.edges):
        wi, wj = b[k, e[:, 0]], b[k, e[:, 1]]
        wins = rng.binomial(trials, wi / (wi + wj))
        values.append(btl_log_odds(wins, trials))
    return ObservationSet(g, tuple(values))


@dataclass(frozen=True)
class SyntheticInstance:
    truth: StrengthTrajectory
    graph: GraphSequence
    observations: ObservationSet


def generate_instance(cfg: SynthConfig, trial: int = 0) -> SyntheticInstance:
    """Truth, graphs and observations for one trial.

    In BTL mode (``btl_trials`` set) the strengths are ``w* = exp(z*)`` and the
    truth returned is the centered ``z* = ln w*``.
    """
    truth = generate_ground_truth(cfg, trial=trial)
    g = generate_er_sequence(cfg, trial=trial)
    if cfg.btl_trials is not None:
        obs = generate_btl_observations(np.exp(truth.blocks), g, cfg.btl_trials, cfg.seed, trial)
    else:
        obs = generate_observations(truth, g, cfg.noise_sigma, cfg.seed, trial)
    return SyntheticInstance(truth, g, obs)
