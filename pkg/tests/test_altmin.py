import itertools

import numpy as np
import pytest

from modules.altmin import (
    alt_min,
    alt_min_multistart,
    random_selection,
    start_seeds,
    update_graph,
    update_signals,
)
from modules.config import AltMinConfig, RegularizationConfig
from modules.denoiser import joint_objective, tikhonov_denoise
from modules.errors import DomainError
from modules.graph_core import CandidateGraph, EdgeSelection
from modules.noiseless import edge_costs, select_k_smallest


def _instance(seed, n=None, l=None):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(3, 11))
    l = l or int(rng.integers(1, 6))
    return rng.standard_normal((n, l))


class TestAltMin:
    def test_singleton_feasible_set(self):
        Y = _instance(0, n=4, l=3)
        res = alt_min(Y, AltMinConfig(k=6, gamma=1.0, seed=3))
        assert res.trace.converged
        assert res.trace.iterations_run <= 2
        np.testing.assert_array_equal(res.selection.weights, np.ones(6))

    def test_constant_input(self):
        Y = np.full((5, 3), 2.0)
        res = alt_min(Y, AltMinConfig(k=3, gamma=1.0))
        assert res.trace.converged
        assert res.trace.iterations_run == 1
        assert res.trace.best_objective == pytest.approx(0.0, abs=1e-20)
        np.testing.assert_allclose(res.x_hat, Y, atol=1e-12)

    @pytest.mark.parametrize("seed", range(100))
    def test_monotone_descent(self, seed):
        Y = _instance(seed)
        M = Y.shape[0] * (Y.shape[0] - 1) // 2
        k = int(np.random.default_rng(seed).integers(1, M + 1))
        res = alt_min(Y, AltMinConfig(k=k, gamma=1.0, seed=seed))
        obj = res.trace.objective_per_iteration
        assert len(obj) == 2 * res.trace.iterations_run
        assert all(b <= a + 1e-10 for a, b in zip(obj, obj[1:]))
        assert res.trace.best_objective == pytest.approx(min(obj[::2]))

    @pytest.mark.parametrize("seed", range(20))
    def test_fixed_point(self, seed):
        Y = _instance(500 + seed)
        cfg = AltMinConfig(k=3, gamma=0.8, seed=seed)
        res = alt_min(Y, cfg)
        if res.trace.reason != "fixed-point":
            pytest.skip(f"stopped by {res.trace.reason}")
        g = CandidateGraph(Y.shape[0])
        reg = RegularizationConfig(gamma=0.8)
        np.testing.assert_allclose(update_signals(Y, res.selection, reg, g), res.x_hat, atol=1e-10)
        assert update_graph(res.x_hat, res.selection, 3, g) == res.selection

    def test_seed_determinism(self):
        Y = _instance(42, n=8, l=4)
        a = alt_min(Y, AltMinConfig(k=5, seed=7))
        b = alt_min(Y, AltMinConfig(k=5, seed=7))
        assert a.trace.selections == b.trace.selections
        np.testing.assert_array_equal(a.x_hat, b.x_hat)

    @pytest.mark.parametrize("seed", range(5))
    def test_not_below_exhaustive_minimum(self, seed):
        Y = _instance(900 + seed, n=6, l=4)
        res = alt_min(Y, AltMinConfig(k=3, gamma=1.0, seed=seed))
        best = np.inf
        for s in itertools.combinations(range(15), 3):
            w = EdgeSelection.from_indices(s, 15)
            X = tikhonov_denoise(Y, w)
            best = min(best, joint_objective(Y, X, w, 1.0))
        assert res.trace.best_objective >= best - 1e-12

    def test_noisy_sorting_init(self):
        Y = _instance(3, n=7, l=3)
        res = alt_min(Y, AltMinConfig(k=4, init="from-noisy-sorting"))
        first = select_k_smallest(edge_costs(Y), 4)
        assert res.trace.selections[0] == tuple(int(i) for i in first.indices())

    def test_explicit_start(self):
        Y = _instance(4, n=5, l=2)
        start = EdgeSelection.from_indices([0, 9], 10)
        res = alt_min(Y, AltMinConfig(k=2), start=start)
        assert res.trace.selections[0] == (0, 9)
        with pytest.raises(DomainError):
            alt_min(Y, AltMinConfig(k=3), start=start)

    def test_k_exceeds_m(self):
        with pytest.raises(DomainError):
            alt_min(np.zeros((3, 2)), AltMinConfig(k=4))


class TestUpdateGraph:
    def test_keeps_current_on_ties(self):
        g = CandidateGraph(4)
        X = np.zeros((4, 2))
        current = EdgeSelection.from_indices([3, 5], 6)
        assert update_graph(X, current, 2, g) == current

    def test_moves_to_cheaper_edges(self):
        g = CandidateGraph(3)
        X = np.array([[0.0], [1.0], [3.0]])
        current = EdgeSelection.from_indices([1], 3)
        np.testing.assert_array_equal(update_graph(X, current, 1, g).indices(), [0])


class TestRandomSelection:
    def test_distinct_and_deterministic(self):
        a = random_selection(45, 10, 123)
        assert a.k == 10
        assert a == random_selection(45, 10, 123)

    def test_seeds_differ(self):
        draws = {random_selection(45, 3, s).key() for s in range(20)}
        assert len(draws) > 1


class TestMultistart:
    def test_single_start_matches_alt_min(self):
        Y = _instance(8, n=6, l=3)
        cfg = AltMinConfig(k=4, seed=11)
        a = alt_min_multistart(Y, cfg, starts=1)
        b = alt_min(Y, cfg)
        assert a.selection == b.selection
        assert a.trace.best_objective == b.trace.best_objective

    def test_best_of_starts(self):
        Y = _instance(9, n=7, l=3)
        cfg = AltMinConfig(k=5, seed=2)
        best = alt_min_multistart(Y, cfg, starts=4)
        singles = [alt_min(Y, cfg.model_copy(update={"seed": s})).trace.best_objective for s in start_seeds(2, 4)]
        assert best.trace.best_objective == min(singles)

    def test_parallel_matches_serial(self):
        Y = _instance(10, n=6, l=2)
        cfg = AltMinConfig(k=3, seed=5)
        a = alt_min_multistart(Y, cfg, starts=3, jobs=1)
        b = alt_min_multistart(Y, cfg, starts=3, jobs=2)
        assert a.selection == b.selection
        np.testing.assert_allclose(a.x_hat, b.x_hat, rtol=1e-12)

    def test_rejects_zero_starts(self):
        with pytest.raises(DomainError):
            alt_min_multistart(np.zeros((3, 1)), AltMinConfig(k=1), starts=0)
