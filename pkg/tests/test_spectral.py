import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyntransync.graphseq import smoothness_norm_sq
from dyntransync.spectral import (
    centered_basis,
    low_frequency_count_bound,
    low_frequency_indices,
    path_eigenvalues,
    path_eigenvectors,
    project_low_frequency,
    spectral_basis,
)

from oracles import path_laplacian, projection_dense


def centered_random(r, T, n, scale=1.0):
    z = r.normal(scale=scale, size=(T + 1, n))
    return z - z.mean(axis=1, keepdims=True)


def project(z, tau):
    return project_low_frequency(z, tau).blocks


class TestPathEigenpairs:
    def test_three_vertex_path(self):
        np.testing.assert_allclose(path_eigenvalues(2), [3.0, 1.0, 0.0], atol=1e-14)
        np.testing.assert_allclose(np.linalg.eigvalsh(path_laplacian(2))[::-1], [3.0, 1.0, 0.0], atol=1e-14)

    def test_single_edge(self):
        np.testing.assert_allclose(path_eigenvalues(1), [2.0, 0.0], atol=1e-15)

    def test_rejects_empty_horizon(self):
        with pytest.raises(ValueError):
            path_eigenvalues(0)
        with pytest.raises(ValueError):
            path_eigenvectors(0)

    @pytest.mark.parametrize("T", [1, 2, 3, 7, 16, 33, 64])
    def test_residual_and_orthonormality(self, T):
        mu, U = path_eigenvalues(T), path_eigenvectors(T)
        L = path_laplacian(T)
        assert np.all(np.diff(mu) <= 1e-15)
        resid = np.linalg.norm(L @ U - U * mu, axis=0)
        assert resid.max() < 1e-8 * max(mu[0], 1.0)
        np.testing.assert_allclose(U.T @ U, np.eye(T + 1), atol=1e-12)
        np.testing.assert_allclose(np.sort(mu), np.linalg.eigvalsh(L), atol=1e-10)


class TestCenteredBasis:
    def test_two_items(self):
        a = centered_basis(2)[:, 0]
        assert abs(abs(a[0]) - 1 / math.sqrt(2)) < 1e-15
        assert a[0] == pytest.approx(-a[1], abs=1e-15)

    @pytest.mark.parametrize("n", [3, 4, 9])
    def test_orthonormal_and_centered(self, n):
        A = centered_basis(n)
        assert A.shape == (n, n - 1)
        np.testing.assert_allclose(A.T @ A, np.eye(n - 1), atol=1e-14)
        np.testing.assert_allclose(A.sum(axis=0), 0.0, atol=1e-14)
        # C C^T = nI - 11^T acts as n on the centered subspace
        CCt = n * np.eye(n) - np.ones((n, n))
        np.testing.assert_allclose(CCt @ A, n * A, atol=1e-12)

    def test_rejects_single_item(self):
        with pytest.raises(ValueError):
            centered_basis(1)


class TestProjection:
    def test_rejects_nonpositive_tau(self):
        with pytest.raises(ValueError):
            project_low_frequency(np.zeros((3, 3)), 0.0)

    def test_full_pass(self, rng):
        for n, T in [(3, 2), (5, 7), (2, 10)]:
            z = centered_random(rng, T, n)
            tau = n * path_eigenvalues(T)[0] * 1.001
            np.testing.assert_allclose(project(z, tau), z, atol=1e-12)

    def test_time_constant_passes(self, rng):
        z = np.tile(centered_random(rng, 0, 4), (6, 1))
        for tau in [1e-9, 0.3, 50.0]:
            np.testing.assert_allclose(project(z, tau), z, atol=1e-12)

    def test_block_means_pass_through(self, rng):
        z = rng.normal(size=(5, 3))
        p = project(z, 1e-6)
        np.testing.assert_allclose(p.mean(axis=1), z.mean(axis=1), atol=1e-12)

    def test_small_example_against_dense(self, rng):
        # nonzero eigenvalues of E^T E for n=3, T=2 are 3 * {3, 1}, each twice
        P, dim = projection_dense(3, 2, 2.5)
        assert dim == 5
        kept = low_frequency_indices(spectral_basis(2, 3), 2.5).kept_time_indices
        assert kept == (2,)
        # (n - 1) centered directions per kept index plus one block-mean direction per step
        assert (3 - 1) * len(kept) + 3 == dim
        for _ in range(10):
            z = rng.normal(size=(3, 3))
            np.testing.assert_allclose(project(z, 2.5).ravel(), P @ z.ravel(), atol=1e-9)

    def test_oracle_equivalence(self, rng):
        for n in range(2, 7):
            for T in range(1, 48 // n):
                mu = n * path_eigenvalues(T)
                # midpoints between consecutive eigenvalues, never on a tie
                for tau in np.r_[(mu[:-1] + mu[1:]) / 2, 2 * mu[0]]:
                    P, _ = projection_dense(n, T, tau)
                    z = rng.normal(size=(T + 1, n))
                    np.testing.assert_allclose(project(z, tau).ravel(), P @ z.ravel(), atol=1e-9)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 8), st.integers(1, 20), st.floats(1e-3, 100.0), st.integers(0, 2**32 - 1))
    def test_idempotent_and_parseval(self, n, T, tau, seed):
        z = np.random.default_rng(seed).normal(size=(T + 1, n))
        p = project(z, tau)
        np.testing.assert_allclose(project(p, tau), p, atol=1e-10)
        total = np.sum(z**2)
        assert np.sum(p**2) + np.sum((z - p) ** 2) == pytest.approx(total, rel=1e-10)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 8), st.integers(1, 20), st.floats(1e-3, 50.0), st.floats(1e-3, 50.0),
           st.integers(0, 2**32 - 1))
    def test_monotone_in_tau(self, n, T, t1, t2, seed):
        t1, t2 = sorted((t1, t2))
        z = np.random.default_rng(seed).normal(size=(T + 1, n))
        assert np.linalg.norm(project(z, t1)) <= np.linalg.norm(project(z, t2)) + 1e-12

    @settings(max_examples=100, deadline=None)
    @given(st.integers(2, 8), st.integers(1, 30), st.floats(1e-3, 100.0), st.integers(0, 2**32 - 1))
    def test_bias_bound(self, n, T, tau, seed):
        z = np.random.default_rng(seed).normal(size=(T + 1, n))
        S = smoothness_norm_sq(z)
        assert np.sum((z - project(z, tau)) ** 2) <= S / tau + 1e-9


class TestCountBound:
    def test_direct_evaluation(self):
        # 15 + 2 * 11 / pi = 22.003 rounds up to 23
        assert low_frequency_count_bound(10, 5, 1.0) == 23
        assert low_frequency_count_bound(4, 3, 1e-300) == 7

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            low_frequency_count_bound(3, 3, 0.0)

    def test_bounds_dense_count(self, rng):
        for _ in range(50):
            T, n = int(rng.integers(1, 13)), int(rng.integers(2, 7))
            eps = float(rng.uniform(1e-3, 2.0))
            _, dim = projection_dense(n, T, eps)
            assert dim <= low_frequency_count_bound(T, n, eps)
