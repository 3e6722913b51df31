"""Comparison graph sequences and the matrix-free operators built on them.

Items and time steps are 0-indexed. Step ``k`` corresponds to time ``k / T``.
An edge ``(i, j)`` is always stored with ``i < j`` and its incidence column
carries ``+1`` at ``i`` and ``-1`` at ``j``, so that applying the transposed
incidence to a strength vector gives ``z_i - z_j``.

The temporal smoothness penalty is applied through the reduced operator

    E_red = M^T (x) sqrt(n) (I - 11^T / n)

which has ``n`` rows per time step instead of ``n(n-1)/2``. Because
``(sqrt(n) P)^T (sqrt(n) P) = nI - 11^T = C C^T`` for the complete-graph
incidence ``C``, it has exactly the same Gram matrix as ``M^T (x) C^T``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DimensionError


@dataclass(frozen=True, eq=False)
class GraphSequence:
    """The ``T + 1`` comparison graphs ``G_0, ..., G_T`` on ``n`` items.

    ``edges[k]`` is an ``(m_k, 2)`` integer array of canonical edges, sorted
    lexicographically. Use :meth:`from_edge_lists` to build one from loose
    pair lists in any orientation.
    """

    n: int
    horizon_T: int
    edges: tuple[np.ndarray, ...]

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"need at least 2 items, got n={self.n}")
        if self.horizon_T < 1:
            raise ValueError(f"need horizon_T >= 1, got {self.horizon_T}")
        if len(self.edges) != self.horizon_T + 1:
            raise DimensionError(
                f"expected {self.horizon_T + 1} edge sets, got {len(self.edges)}")
        checked = []
        for k, e in enumerate(self.edges):
            e = np.asarray(e, dtype=np.int64).reshape(-1, 2)
            if e.size and (e.min() < 0 or e.max() >= self.n):
                raise DimensionError(f"step {k}: endpoint outside [0, {self.n})")
            if np.any(e[:, 0] >= e[:, 1]):
                raise ValueError(f"step {k}: edges must satisfy i < j")
            if len(e) > 1:
                order = np.lexsort((e[:, 1], e[:, 0]))
                e = e[order]
                if np.any(np.all(e[1:] == e[:-1], axis=1)):
                    raise ValueError(f"step {k}: duplicate edge")
            e.setflags(write=False)
            checked.append(e)
        object.__setattr__(self, "edges", tuple(checked))

    @classmethod
    def from_edge_lists(cls, n: int, edge_lists: Sequence[Sequence[Sequence[int]]]) -> GraphSequence:
        """Build a sequence from per-step pair lists, canonicalizing orientation.

        Self-loops and duplicate pairs (in either orientation) raise ``ValueError``.
        """
        steps = []
        for k, pairs in enumerate(edge_lists):
            arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
            if np.any(arr[:, 0] == arr[:, 1]):
                raise ValueError(f"step {k}: self-loop")
            steps.append(np.sort(arr, axis=1))
        return cls(n=n, horizon_T=len(steps) - 1, edges=tuple(steps))

    @property
    def num_steps(self) -> int:
        return self.horizon_T + 1

    @cached_property
    def edge_counts(self) -> np.ndarray:
        return np.array([len(e) for e in self.edges], dtype=np.int64)

    @cached_property
    def offsets(self) -> np.ndarray:
        """Start of each step's block in the stacked edge vector (length T + 2)."""
        return np.concatenate([[0], np.cumsum(self.edge_counts)])

    @property
    def num_edges(self) -> int:
        return int(self.offsets[-1])

    @cached_property
    def _flat_heads_tails(self) -> tuple[np.ndarray, np.ndarray]:
        if self.num_edges == 0:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty
        steps = np.repeat(np.arange(self.num_steps), self.edge_counts)
        allE = np.concatenate(self.edges)
        return steps * self.n + allE[:, 0], steps * self.n + allE[:, 1]

    def union_edges(self) -> np.ndarray:
        if self.num_edges == 0:
            return np.zeros((0, 2), dtype=np.int64)
        return np.unique(np.concatenate(self.edges), axis=0)

    def step_of_edge(self) -> np.ndarray:
        return np.repeat(np.arange(self.num_steps), self.edge_counts)

    def _check_step(self, k: int) -> None:
        if not 0 <= k <= self.horizon_T:
            raise DimensionError(f"step {k} outside [0, {self.horizon_T}]")


@dataclass(frozen=True, eq=False)
class StrengthTrajectory:
    """A vector of ``R^{n(T+1)}`` held as ``T + 1`` blocks of length ``n``."""

    blocks: np.ndarray

    def __post_init__(self):
        b = np.array(self.blocks, dtype=float)
        if b.ndim != 2 or b.shape[0] < 2 or b.shape[1] < 2:
            raise DimensionError(f"blocks must have shape (T+1, n) with T>=1, n>=2; got {b.shape}")
        b.setflags(write=False)
        object.__setattr__(self, "blocks", b)

    @classmethod
    def from_flat(cls, vec, n: int) -> StrengthTrajectory:
        vec = np.asarray(vec, dtype=float)
        if vec.ndim != 1 or vec.size % n:
            raise DimensionError(f"length {vec.size} is not a multiple of n={n}")
        return cls(vec.reshape(-1, n))

    @property
    def n(self) -> int:
        return self.blocks.shape[1]

    @property
    def horizon_T(self) -> int:
        return self.blocks.shape[0] - 1

    @property
    def flat(self) -> np.ndarray:
        return self.blocks.reshape(-1)

    def centered(self) -> StrengthTrajectory:
        return StrengthTrajectory(center_blocks(self.blocks))

    def is_centered(self) -> bool:
        scale = max(float(np.abs(self.blocks).max()), 1e-300)
        return bool(np.all(np.abs(self.blocks.sum(axis=1)) <= 1e-9 * self.n * scale))


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Measurements ``y_ij(k)``, one per canonical edge of each step.

    ``values[k][e]`` belongs to ``graph.edges[k][e]``. The stacked vector
    :attr:`y` follows step-ascending, edge-lexicographic order.
    """

    graph: GraphSequence
    values: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.values) != self.graph.num_steps:
            raise DimensionError(
                f"expected {self.graph.num_steps} value arrays, got {len(self.values)}")
        vals = []
        for k, (v, e) in enumerate(zip(self.values, self.graph.edges)):
            v = np.array(v, dtype=float).reshape(-1)
            if v.size != len(e):
                raise DimensionError(f"step {k}: {v.size} values for {len(e)} edges")
            v.setflags(write=False)
            vals.append(v)
        object.__setattr__(self, "values", tuple(vals))

    @classmethod
    def from_records(cls, n: int, horizon_T: int, records) -> ObservationSet:
        """Build from ``(step, i, j, y)`` tuples; pairs with ``i > j`` are flipped with ``-y``."""
        per_step: list[dict[tuple[int, int], float]] = [dict() for _ in range(horizon_T + 1)]
        for k, i, j, y in records:
            k, i, j, y = int(k), int(i), int(j), float(y)
            if not 0 <= k <= horizon_T:
                raise DimensionError(f"step {k} outside [0, {horizon_T}]")
            if i == j:
                raise ValueError(f"self-loop ({i}, {j}) at step {k}")
            key, val = ((i, j), y) if i < j else ((j, i), -y)
            if key in per_step[k]:
                raise ValueError(f"duplicate observation for {key} at step {k}")
            per_step[k][key] = val
        edges, values = [], []
        for d in per_step:
            keys = sorted(d)
            edges.append(np.array(keys, dtype=np.int64).reshape(-1, 2))
            values.append(np.array([d[key] for key in keys], dtype=float))
        return cls(GraphSequence(n, horizon_T, tuple(edges)), tuple(values))

    @cached_property
    def y(self) -> np.ndarray:
        if self.graph.num_edges == 0:
            return np.zeros(0)
        return np.concatenate(self.values)

    def records(self) -> Iterator[tuple[int, int, int, float]]:
        for k, (e, v) in enumerate(zip(self.graph.edges, self.values)):
            for (i, j), val in zip(e.tolist(), v.tolist()):
                yield k, i, j, val

    def drop(self, removed: dict[int, int]) -> ObservationSet:
        """Copy without the edges indexed by ``removed[k]`` (position within step ``k``)."""
        edges, values = [], []
        for k, (e, v) in enumerate(zip(self.graph.edges, self.values)):
            if k in removed:
                keep = np.ones(len(e), dtype=bool)
                keep[removed[k]] = False
                e, v = e[keep], v[keep]
            edges.append(e)
            values.append(v)
        return ObservationSet(GraphSequence(self.graph.n, self.graph.horizon_T, tuple(edges)),
                              tuple(values))


def as_blocks(z) -> np.ndarray:
    """Return the ``(T+1, n)`` block array of a trajectory or array."""
    if isinstance(z, StrengthTrajectory):
        return z.blocks
    return np.asarray(z, dtype=float)


def center_blocks(z) -> np.ndarray:
    b = as_blocks(z)
    return b - b.mean(axis=1, keepdims=True)


# -- incidence and Laplacian ------------------------------------------------

def incidence_apply(g: GraphSequence, k: int, z_k) -> np.ndarray:
    """``Q_k^T z_k``: one entry ``z_i - z_j`` per edge of step ``k``."""
    g._check_step(k)
    z_k = np.asarray(z_k, dtype=float)
    if z_k.shape != (g.n,):
        raise DimensionError(f"expected vector of length {g.n}, got shape {z_k.shape}")
    e = g.edges[k]
    return z_k[e[:, 0]] - z_k[e[:, 1]]


def incidence_adjoint(g: GraphSequence, k: int, w) -> np.ndarray:
    """``Q_k w``: scatter edge values back to vertices (+ at head, - at tail)."""
    g._check_step(k)
    w = np.asarray(w, dtype=float)
    e = g.edges[k]
    if w.shape != (len(e),):
        raise DimensionError(f"expected vector of length {len(e)}, got shape {w.shape}")
    return (np.bincount(e[:, 0], weights=w, minlength=g.n)
            - np.bincount(e[:, 1], weights=w, minlength=g.n))


def laplacian_apply(g: GraphSequence, k: int, z_k) -> np.ndarray:
    return incidence_adjoint(g, k, incidence_apply(g, k, z_k))


def stacked_incidence_apply(g: GraphSequence, z) -> np.ndarray:
    """``Q^T z`` for the block-diagonal incidence over all steps."""
    b = as_blocks(z)
    if b.shape != (g.num_steps, g.n):
        raise DimensionError(f"expected shape {(g.num_steps, g.n)}, got {b.shape}")
    heads, tails = g._flat_heads_tails
    flat = b.reshape(-1)
    return flat[heads] - flat[tails]


def stacked_incidence_adjoint(g: GraphSequence, w) -> np.ndarray:
    """``Q w`` returned as ``(T+1, n)`` blocks."""
    w = np.asarray(w, dtype=float)
    if w.shape != (g.num_edges,):
        raise DimensionError(f"expected vector of length {g.num_edges}, got shape {w.shape}")
    heads, tails = g._flat_heads_tails
    size = g.num_steps * g.n
    out = np.bincount(heads, weights=w, minlength=size) - np.bincount(tails, weights=w, minlength=size)
    return out.reshape(g.num_steps, g.n)


def stacked_laplacian_apply(g: GraphSequence, z) -> np.ndarray:
    return stacked_incidence_adjoint(g, stacked_incidence_apply(g, z))


# -- connectivity -----------------------------------------------------------

def _components(n: int, edges: np.ndarray) -> tuple[int, np.ndarray]:
    adj = coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n))
    return connected_components(adj, directed=False)


def step_components(g: GraphSequence, k: int) -> tuple[int, np.ndarray]:
    g._check_step(k)
    return _components(g.n, g.edges[k])


def union_components(g: GraphSequence) -> tuple[int, np.ndarray]:
    return _components(g.n, g.union_edges())


def is_connected(g: GraphSequence, k: int) -> bool:
    return step_components(g, k)[0] == 1


def union_is_connected(g: GraphSequence) -> bool:
    return union_components(g)[0] == 1


def all_steps_connected(g: GraphSequence) -> bool:
    return all(is_connected(g, k) for k in range(g.num_steps))


# -- temporal smoothness operator --------------------------------------------

def smoothness_apply(z) -> np.ndarray:
    """Reduced smoothness operator; returns ``T`` blocks ``sqrt(n) * center(z_k - z_{k+1})``.

    Its squared norm equals ``sum_k ||C^T (z_k - z_{k+1})||^2``.
    """
    b = as_blocks(z)
    d = b[:-1] - b[1:]
    return np.sqrt(b.shape[1]) * (d - d.mean(axis=1, keepdims=True))


def smoothness_adjoint(w) -> np.ndarray:
    """Adjoint of :func:`smoothness_apply`; maps ``(T, n)`` to ``(T+1, n)``."""
    w = np.asarray(w, dtype=float)
    n = w.shape[1]
    c = np.sqrt(n) * (w - w.mean(axis=1, keepdims=True))
    out = np.zeros((w.shape[0] + 1, n))
    out[:-1] += c
    out[1:] -= c
    return out


def smoothness_norm_sq(z) -> float:
    """``||E z||^2`` computed from block differences without materializing anything."""
    b = as_blocks(z)
    d = b[:-1] - b[1:]
    n = b.shape[1]
    return float(n * np.sum(d * d) - np.sum(d.sum(axis=1) ** 2))
