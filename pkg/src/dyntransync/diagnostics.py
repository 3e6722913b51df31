"""Dense spectral checks of the identifiability and lower-bound assumptions.

Everything here materializes matrices and is capped at ``n (T + 1) <= 256``;
these are desk-scale sanity checks, not part of the estimation path.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import UnsupportedSizeError
from .graphseq import GraphSequence, is_connected

SIZE_CAP = 256


def _check_size(g: GraphSequence) -> None:
    size = g.n * g.num_steps
    if size > SIZE_CAP:
        raise UnsupportedSizeError(f"dense diagnostics are capped at n(T+1) <= {SIZE_CAP}, got {size}")


def dense_laplacian(g: GraphSequence, k: int) -> np.ndarray:
    L = np.zeros((g.n, g.n))
    e = g.edges[k]
    np.add.at(L, (e[:, 0], e[:, 0]), 1.0)
    np.add.at(L, (e[:, 1], e[:, 1]), 1.0)
    np.add.at(L, (e[:, 0], e[:, 1]), -1.0)
    np.add.at(L, (e[:, 1], e[:, 0]), -1.0)
    return L


def dense_stacked_laplacian(g: GraphSequence) -> np.ndarray:
    _check_size(g)
    return scipy.linalg.block_diag(*(dense_laplacian(g, k) for k in range(g.num_steps)))


def dense_smoothness_gram(n: int, T: int) -> np.ndarray:
    """``(M M^T) (x) (nI - 11^T)``, the Gram matrix of the smoothness operator."""
    if n * (T + 1) > SIZE_CAP:
        raise UnsupportedSizeError(f"dense diagnostics are capped at n(T+1) <= {SIZE_CAP}")
    path = np.diag(np.r_[1.0, np.full(T - 1, 2.0), 1.0]) - np.eye(T + 1, k=1) - np.eye(T + 1, k=-1)
    return np.kron(path, n * np.eye(n) - np.ones((n, n)))


class FiedlerValue(NamedTuple):
    value: float
    connected: bool


def fiedler_value(g: GraphSequence, k: int) -> FiedlerValue:
    """Second-smallest Laplacian eigenvalue of step ``k``; ``(0.0, False)`` if disconnected."""
    if not is_connected(g, k):
        return FiedlerValue(0.0, False)
    return FiedlerValue(float(np.linalg.eigvalsh(dense_laplacian(g, k))[1]), True)


def lambda_min_L(g: GraphSequence) -> FiedlerValue:
    """Smallest nonzero eigenvalue of the stacked Laplacian, i.e. the minimum Fiedler value.

    Flagged (``connected=False``) when some step is disconnected; the value then
    comes from the connected steps only, or is 0 if none is connected.
    """
    vals = [fiedler_value(g, k) for k in range(g.num_steps)]
    connected = [v.value for v in vals if v.connected]
    return FiedlerValue(min(connected) if connected else 0.0, all(v.connected for v in vals))


def norm_L(g: GraphSequence) -> float:
    return max(float(np.linalg.eigvalsh(dense_laplacian(g, k))[-1]) for k in range(g.num_steps))


class NullspaceCheck(NamedTuple):
    rank: int
    expected_rank: int
    passed: bool


def regularized_laplacian(g: GraphSequence, lam: float) -> np.ndarray:
    return dense_stacked_laplacian(g) + lam * dense_smoothness_gram(g.n, g.horizon_T)


def nullspace_rank_check(g: GraphSequence, lam: float) -> NullspaceCheck:
    """Rank of ``L + lam E^T E`` against ``n(T+1) - (T+1)``, plus annihilation of block constants."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    A = regularized_laplacian(g, lam)
    eig = np.linalg.eigvalsh(A)
    rank = int(np.sum(eig > 1e-9 * max(eig[-1], 0.0)))
    expected = g.n * g.num_steps - g.num_steps
    annihilated = all(
        np.abs(A @ np.kron(np.eye(g.num_steps)[k], np.ones(g.n))).max() <= 1e-10
        for k in range(g.num_steps))
    return NullspaceCheck(rank, expected, rank == expected and annihilated)


def assumption3_margin(g: GraphSequence, lam: float, kappa: float) -> float:
    """Smallest eigenvalue of ``(L^2 + lam^2 G^2) / kappa + lam (G L + L G)``, ``G = E^T E``.

    A value ``>= -tol`` means the lower-bound condition holds at this ``(lam, kappa)``.
    """
    if not lam > 0 or not kappa > 0:
        raise ValueError(f"need lam > 0 and kappa > 0, got {lam}, {kappa}")
    L = dense_stacked_laplacian(g)
    G = dense_smoothness_gram(g.n, g.horizon_T)
    A = (L @ L + lam**2 * (G @ G)) / kappa + lam * (G @ L + L @ G)
    return float(np.linalg.eigvalsh((A + A.T) / 2)[0])
