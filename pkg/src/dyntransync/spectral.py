"""Closed-form eigenstructure of the smoothness Gram matrix and low-pass projection.

The Gram matrix of the smoothness operator factors as ``(M M^T) (x) (C C^T)``
where ``M M^T`` is the Laplacian of the path on ``T + 1`` vertices and
``C C^T = nI - 11^T``. Both factors have explicit eigenvectors (a DCT-II basis
and any orthonormal basis of ``1^perp``), so projecting onto the span of
eigenvectors below a threshold never needs an eigensolver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .graphseq import StrengthTrajectory, as_blocks


def path_eigenvalues(T: int) -> np.ndarray:
    """Eigenvalues ``mu_0 >= ... >= mu_T = 0`` of the path Laplacian on ``T + 1`` vertices."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    freq = T - np.arange(T + 1)
    return 4.0 * np.sin(freq * np.pi / (2.0 * (T + 1))) ** 2


def path_eigenvectors(T: int) -> np.ndarray:
    """Orthonormal eigenvectors as columns, column ``k`` matching ``path_eigenvalues(T)[k]``.

    Column ``k`` has frequency ``j = T - k`` and entries proportional to
    ``cos((i + 1/2) j pi / (T + 1))``; the last column is constant.
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    N = T + 1
    i = np.arange(N)[:, None] + 0.5
    freq = (T - np.arange(N))[None, :]
    U = np.cos(i * freq * np.pi / N) * np.sqrt(2.0 / N)
    U[:, -1] = 1.0 / np.sqrt(N)
    return U


def centered_basis(n: int) -> np.ndarray:
    """Helmert basis of ``1_n^perp`` as an ``(n, n-1)`` matrix with orthonormal columns."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    return scipy.linalg.helmert(n).T


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    horizon_T: int
    n: int
    path_eigenvalues: np.ndarray
    path_eigenvectors: np.ndarray
    centered_basis: np.ndarray

    @property
    def centered_eigenvalue(self) -> float:
        """The common nonzero eigenvalue of ``C C^T = nI - 11^T`` (on ``1^perp``)."""
        return float(self.n)

    def gram_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of the smoothness Gram matrix restricted to centered blocks, per time index."""
        return self.centered_eigenvalue * self.path_eigenvalues


@lru_cache(maxsize=64)
def spectral_basis(T: int, n: int) -> SpectralBasis:
    """Cached, read-only :class:`SpectralBasis` for a given ``(T, n)``."""
    mu, U, A = path_eigenvalues(T), path_eigenvectors(T), centered_basis(n)
    for arr in (mu, U, A):
        arr.setflags(write=False)
    return SpectralBasis(T, n, mu, U, A)


@dataclass(frozen=True)
class FrequencyIndexSet:
    tau: float
    kept_time_indices: tuple[int, ...]


def low_frequency_indices(basis: SpectralBasis, tau: float) -> FrequencyIndexSet:
    """Time indices ``k`` whose centered eigenvalue ``n * mu_k`` lies strictly below ``tau``."""
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    kept = np.flatnonzero(basis.gram_eigenvalues() < tau)
    return FrequencyIndexSet(float(tau), tuple(int(k) for k in kept))


def project_low_frequency(z, tau: float, basis: SpectralBasis | None = None) -> StrengthTrajectory:
    """Orthogonal projection onto the span of Gram eigenvectors with eigenvalue below ``tau``.

    Block means have eigenvalue 0 and always pass through; the centered part of
    each item coordinate is filtered in the path eigenbasis.
    """
    b = as_blocks(z)
    T, n = b.shape[0] - 1, b.shape[1]
    if basis is None:
        basis = spectral_basis(T, n)
    kept = list(low_frequency_indices(basis, tau).kept_time_indices)
    means = b.mean(axis=1, keepdims=True)
    U = basis.path_eigenvectors[:, kept]
    filtered = U @ (U.T @ (b - means))
    return StrengthTrajectory(filtered + means)


def low_frequency_count_bound(T: int, n: int, eps: float) -> int:
    """Upper bound ``ceil(T + n + sqrt((n-1) eps) (T+1) / pi)`` on the low-frequency index count."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    return math.ceil(T + n + math.sqrt((n - 1) * eps) * (T + 1) / math.pi)
