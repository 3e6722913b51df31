import numpy as np
import pytest

from dyntransync.errors import ConvergenceError, PreconditionError
from dyntransync.estimators import (
    SolverConfig,
    auto_parameter,
    choose_lambda,
    choose_tau,
    dls,
    dls_objective,
    dproj,
    estimate,
    naive_ls,
)
from dyntransync.graphseq import GraphSequence, ObservationSet
from dyntransync.spectral import path_eigenvalues
from dyntransync.synth import (
    SynthConfig,
    generate_instance,
    generation_threshold,
    noiseless_observations,
)

from conftest import random_graph_sequence, random_observations
from oracles import dls_dense, dproj_dense, naive_dense


def complete_steps(n, T):
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    return GraphSequence.from_edge_lists(n, [edges] * (T + 1))


class TestNaiveLS:
    def test_symmetric_split(self):
        obs = ObservationSet.from_records(2, 1, [(0, 0, 1, 3.0), (1, 0, 1, 3.0)])
        np.testing.assert_allclose(naive_ls(obs).trajectory.blocks, [[1.5, -1.5], [1.5, -1.5]], atol=1e-12)

    def test_noiseless_exact(self):
        for seed in range(10):
            inst = generate_instance(SynthConfig(6, 8, 1.0, 0.0, 0.6, seed=seed, connect_each_step=True))
            est = naive_ls(inst.observations).trajectory.blocks
            assert np.abs(est - inst.truth.blocks).max() < 1e-8

    def test_matches_dense_pinv(self, rng):
        for _ in range(20):
            g = random_graph_sequence(rng, int(rng.integers(2, 6)), int(rng.integers(1, 5)), p=0.4)
            obs = random_observations(rng, g)
            np.testing.assert_allclose(naive_ls(obs).trajectory.blocks, naive_dense(obs), atol=1e-7)

    def test_empty_steps_give_zero_blocks(self):
        g = GraphSequence.from_edge_lists(3, [[(0, 1)], []])
        obs = ObservationSet(g, (np.array([2.0]), np.zeros(0)))
        np.testing.assert_allclose(naive_ls(obs).trajectory.blocks, [[1.0, -1.0, 0.0], [0.0, 0.0, 0.0]],
                                   atol=1e-12)

    def test_iteration_cap_raises(self, rng):
        g = random_graph_sequence(rng, 8, 5, p=0.5)
        obs = random_observations(rng, g)
        with pytest.raises(ConvergenceError) as info:
            naive_ls(obs, SolverConfig(rel_tolerance=1e-14, max_iterations=1))
        assert info.value.iterations == 1


class TestDLS:
    def test_matches_dense_pinv(self, rng):
        for _ in range(25):
            g = random_graph_sequence(rng, int(rng.integers(2, 5)), int(rng.integers(1, 6)), p=0.4)
            obs = random_observations(rng, g)
            lam = float(10 ** rng.uniform(-2, 2))
            np.testing.assert_allclose(dls(obs, lam).trajectory.blocks, dls_dense(obs, lam), atol=1e-7)

    def test_time_constant_truth_recovered(self, rng):
        g = random_graph_sequence(rng, 5, 6, p=0.3)
        z = np.tile(rng.normal(size=5), (7, 1))
        z -= z.mean(axis=1, keepdims=True)
        obs = noiseless_observations(z, g)
        for lam in [1e-3, 1.0, 1e3]:
            assert np.abs(dls(obs, lam).trajectory.blocks - z).max() < 1e-8

    def test_large_penalty_flattens(self, rng):
        g = complete_steps(4, 5)
        obs = random_observations(rng, g)
        b = dls(obs, 1e8).trajectory.blocks
        spread = np.abs(b - b.mean(axis=0)).max()
        assert spread <= 1e-3 * np.abs(b).max()

    def test_disconnected_union_rejected(self):
        g = GraphSequence.from_edge_lists(4, [[(0, 1)], [(2, 3)]])
        obs = ObservationSet(g, (np.ones(1), np.ones(1)))
        with pytest.raises(PreconditionError):
            dls(obs, 1.0)

    def test_rejects_nonpositive_lambda(self, rng):
        g = complete_steps(3, 2)
        with pytest.raises(ValueError):
            dls(random_observations(rng, g), 0.0)

    def test_optimality_certificate(self, rng):
        for _ in range(5):
            g = random_graph_sequence(rng, 6, 8, p=0.3)
            obs = random_observations(rng, g)
            lam = 2.0
            z = dls(obs, lam).trajectory.blocks
            base = dls_objective(obs, z, lam)
            for _ in range(50):
                d = rng.normal(size=z.shape)
                d -= d.mean(axis=1, keepdims=True)
                assert dls_objective(obs, z + 1e-4 * d, lam) >= base - 1e-8

    def test_objective_blind_to_block_shifts(self, rng):
        g = random_graph_sequence(rng, 4, 3)
        obs = random_observations(rng, g)
        z = rng.normal(size=(4, 4))
        shifted = z + rng.normal(size=(4, 1))
        assert dls_objective(obs, shifted, 0.7) == pytest.approx(dls_objective(obs, z, 0.7), rel=1e-10)

    @staticmethod
    def _penalty_sweep(factors, seeds=30, T=32, S=1.0):
        lam_star = choose_lambda(T, S, "evolving-with-A3")
        errs = {f: [] for f in factors}
        for seed in range(seeds):
            inst = generate_instance(SynthConfig(10, T, S, 1.0, (0.1, 0.23), seed=seed))
            for f in factors:
                est = dls(inst.observations, f * lam_star).trajectory.blocks
                errs[f].append(np.sum((est - inst.truth.blocks) ** 2) / (T + 1))
        return {f: float(np.mean(v)) for f, v in errs.items()}

    def test_rule_beats_undersmoothing(self):
        means = self._penalty_sweep((0.01, 1.0))
        assert means[1.0] < means[0.01]

    @pytest.mark.xfail(strict=True, reason="unit-norm truths are nearly time-constant, "
                                           "so heavier smoothing keeps helping")
    def test_rule_beats_oversmoothing(self):
        means = self._penalty_sweep((1.0, 100.0))
        assert means[1.0] < means[100.0]


class TestDProj:
    def test_matches_dense_pipeline(self, rng):
        for _ in range(25):
            n, T = int(rng.integers(2, 5)), int(rng.integers(1, 6))
            g = random_graph_sequence(rng, n, T, p=0.5)
            obs = random_observations(rng, g)
            mu = n * path_eigenvalues(T)
            tau = float(rng.uniform(0.1, 1.1) * mu[0])
            if np.min(np.abs(mu - tau)) < 1e-6:
                continue
            np.testing.assert_allclose(dproj(obs, tau).trajectory.blocks, dproj_dense(obs, tau), atol=1e-7)

    def test_full_pass_equals_naive(self, rng):
        g = random_graph_sequence(rng, 5, 6)
        obs = random_observations(rng, g)
        tau = 5 * path_eigenvalues(6)[0] + 1
        np.testing.assert_allclose(dproj(obs, tau).trajectory.blocks, naive_ls(obs).trajectory.blocks,
                                   atol=1e-12)

    def test_noiseless_truth_in_band_recovered(self):
        for seed in range(10):
            cfg = SynthConfig(5, 20, 0.5, 0.0, 0.7, seed=seed, connect_each_step=True)
            inst = generate_instance(cfg)
            tau = generation_threshold(20, 5, 0.5)
            est = dproj(inst.observations, tau).trajectory.blocks
            assert np.abs(est - inst.truth.blocks).max() < 1e-7


class TestParameterRules:
    def test_lambda_values(self):
        assert choose_lambda(100, 1.0, "fixed-graph") == pytest.approx(21.5443, rel=1e-5)
        assert choose_lambda(100, 1.0, "evolving-with-A3") == pytest.approx(21.5443, rel=1e-5)
        assert choose_lambda(100, 1.0) == pytest.approx(6.3096, rel=1e-5)
        for regime in ("fixed-graph", "evolving", "evolving-with-A3"):
            assert choose_lambda(37, 37.0, regime) == pytest.approx(1.0)

    def test_tau_values(self):
        assert choose_tau(100, 1.0) == pytest.approx(0.04642, rel=1e-4)
        for T in (4, 64, 1000):
            assert choose_tau(T, 1.0 / T) == pytest.approx(T ** (-4.0 / 3.0), rel=1e-12)
        assert choose_tau(50, 50.0) == pytest.approx(1.0)

    @pytest.mark.parametrize("args", [(0, 1.0), (10, 0.0), (10, -1.0)])
    def test_invalid_inputs(self, args):
        with pytest.raises(ValueError):
            choose_lambda(*args)
        with pytest.raises(ValueError):
            choose_tau(*args)

    def test_unknown_regime(self):
        with pytest.raises(ValueError):
            choose_lambda(10, 1.0, "static")

    def test_dispatch(self, rng):
        g = complete_steps(3, 2)
        obs = random_observations(rng, g)
        assert auto_parameter("ls", 2, 1.0) is None
        assert auto_parameter("dproj", 8, 1.0) == choose_tau(8, 1.0)
        assert estimate(obs, "dls", 1.5).parameter == 1.5
        with pytest.raises(ValueError):
            estimate(obs, "mle")


def test_outputs_centered(rng):
    g = random_graph_sequence(rng, 6, 4, p=0.2)
    obs = random_observations(rng, g)
    for method, param in (("ls", None), ("dls", 1.0), ("dproj", 0.5)):
        assert estimate(obs, method, param).trajectory.is_centered()
