import math

import numpy as np
import pytest

from modules.config import LearnOptions, SynthConfig
from modules.errors import DomainError, TrialError
from modules.experiments import (
    LEARNERS,
    add_noise,
    evaluate,
    generate_smooth_signals,
    head_to_head,
    learn,
    monte_carlo,
    monte_carlo_on_data,
    plant_graph,
    run_trial,
    sweep_k,
    sweep_sigma,
)
from modules.graph_core import CandidateGraph, EdgeSelection, assemble_laplacian
from modules.noiseless import learn_noiseless
from modules.rng import STREAM_SIGNAL, generator


class TestPlantGraph:
    def test_full_budget(self):
        w = plant_graph(SynthConfig(n=5, k_true=10, l=3))
        np.testing.assert_array_equal(w.weights, np.ones(10))

    def test_deterministic(self):
        cfg = SynthConfig(n=8, k_true=6, l=3, seed=17)
        assert plant_graph(cfg) == plant_graph(cfg)
        assert plant_graph(cfg).k == 6

    def test_uniform_single_edge(self):
        m, draws = 10, 2000
        counts = np.zeros(m)
        for s in range(draws):
            counts[plant_graph(SynthConfig(n=5, k_true=1, l=1, seed=s)).indices()[0]] += 1
        p = 1 / m
        bound = 4 * math.sqrt(draws * p * (1 - p))
        assert np.all(np.abs(counts - draws * p) <= bound + 1)

    def test_k_true_validated(self):
        with pytest.raises(ValueError):
            SynthConfig(n=4, k_true=7, l=2)


class TestSmoothSignals:
    def test_empty_graph_returns_raw_gaussian(self):
        cfg = SynthConfig(n=5, k_true=1, l=4, seed=3)
        X = generate_smooth_signals(EdgeSelection.empty(10), cfg)
        Z = generator(3, STREAM_SIGNAL).standard_normal((5, 4))
        np.testing.assert_array_equal(X, Z)

    def test_small_alpha_close_to_raw(self):
        cfg = SynthConfig(n=6, k_true=5, l=3, seed=1, alpha=1e-9)
        w = plant_graph(cfg)
        X = generate_smooth_signals(w, cfg)
        Z = generate_smooth_signals(EdgeSelection.empty(15), cfg)
        np.testing.assert_allclose(X, Z, atol=1e-7)

    def test_smoother_than_noise(self):
        cfg = SynthConfig(n=20, k_true=40, l=50, seed=2, alpha=10.0)
        w = plant_graph(cfg)
        X = generate_smooth_signals(w, cfg)
        Z = generate_smooth_signals(EdgeSelection.empty(190), cfg)
        L = assemble_laplacian(w, CandidateGraph(20))
        assert L.quadratic(X) / np.sum(X**2) < L.quadratic(Z) / np.sum(Z**2)


class TestAddNoise:
    def test_zero_sigma(self):
        X = np.random.default_rng(0).standard_normal((3, 4))
        np.testing.assert_array_equal(add_noise(X, 0.0, 5), X)

    def test_reproducible(self):
        X = np.zeros((4, 5))
        np.testing.assert_array_equal(add_noise(X, 0.3, 9), add_noise(X, 0.3, 9))

    def test_variance(self):
        X = np.zeros((100, 200))
        Y = add_noise(X, 0.7, 1)
        assert abs(np.var(Y - X) - 0.49) <= 0.05 * 0.49

    def test_negative_sigma(self):
        with pytest.raises(DomainError):
            add_noise(np.zeros((2, 2)), -0.1, 0)


class TestEvaluate:
    def test_perfect(self):
        w = EdgeSelection.from_indices([0, 3], 6)
        X = np.random.default_rng(1).standard_normal((4, 3))
        rep = evaluate(w, X, w, X)
        assert rep.mse == 0.0
        assert rep.edge_f1 == 1.0

    def test_disjoint_edges(self):
        X = np.zeros((4, 2))
        rep = evaluate(EdgeSelection.from_indices([0, 1], 6), X, EdgeSelection.from_indices([2, 3], 6), X)
        assert rep.edge_precision == 0.0 and rep.edge_recall == 0.0 and rep.edge_f1 == 0.0

    def test_partial_overlap(self):
        X = np.zeros((4, 2))
        rep = evaluate(EdgeSelection.from_indices([0, 1], 6), X, EdgeSelection.from_indices([1, 2, 3], 6), X)
        assert rep.edge_precision == pytest.approx(0.5)
        assert rep.edge_recall == pytest.approx(1 / 3)
        assert rep.edge_f1 == pytest.approx(0.4)

    def test_mse_normalization(self):
        x_true = np.zeros((2, 3))
        x_hat = np.ones((2, 3))
        rep = evaluate(EdgeSelection.empty(1), x_hat, None, x_true)
        assert rep.mse == pytest.approx(1.0)
        assert math.isnan(rep.edge_f1)

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            evaluate(EdgeSelection.empty(6), np.zeros((4, 2)), None, np.zeros((4, 3)))


class TestLearners:
    def test_registry(self):
        assert set(LEARNERS) == {"noiseless", "altmin", "relax", "raw"}

    def test_unknown(self):
        with pytest.raises(DomainError):
            learn("sdp", np.zeros((3, 2)), LearnOptions(k=1))

    @pytest.mark.parametrize("method", ["noiseless", "altmin", "relax"])
    def test_budget_respected(self, method):
        Y = np.random.default_rng(3).standard_normal((6, 4))
        res = learn(method, Y, LearnOptions(k=4))
        assert res.selection.k == 4
        assert res.info["converged"] in (True, False)


class TestMonteCarlo:
    CFG = SynthConfig(n=6, k_true=5, l=8, sigma=0.3, seed=21)

    def test_single_trial_equals_run_trial(self):
        rep = monte_carlo("noiseless", self.CFG, trials=1)
        single = run_trial("noiseless", self.CFG, LearnOptions(k=5), 0)
        assert rep.trials == 1
        assert rep.mean["mse"] == single.mse
        assert rep.mean["edge_f1"] == single.edge_f1
        assert rep.stderr["mse"] == 0.0

    def test_deterministic(self):
        a = monte_carlo("altmin", self.CFG, trials=4)
        b = monte_carlo("altmin", self.CFG, trials=4)
        assert a.mean == b.mean and a.stderr == b.stderr

    def test_jobs_do_not_change_aggregates(self):
        a = monte_carlo("relax", self.CFG, trials=4, jobs=1)
        b = monte_carlo("relax", self.CFG, trials=4, jobs=2)
        for key in a.mean:
            assert a.mean[key] == pytest.approx(b.mean[key], rel=1e-12, nan_ok=True)

    def test_failed_trial_reports_seed(self):
        with pytest.raises(TrialError) as exc:
            monte_carlo("noiseless", self.CFG, trials=2, opts=LearnOptions(k=99))
        assert exc.value.trial == 0
        assert exc.value.exit_code == 2

    def test_rejects_zero_trials(self):
        with pytest.raises(DomainError):
            monte_carlo("raw", self.CFG, trials=0)

    def test_raw_learner_keeps_noise(self):
        rep = monte_carlo("raw", self.CFG.model_copy(update={"sigma": 0.5}), trials=3)
        # raw 는 Y 그대로 -> mse ~ sigma^2
        assert 0.1 < rep.mean["mse"] < 0.5

    def test_on_data(self):
        X = generate_smooth_signals(plant_graph(self.CFG), self.CFG.model_copy(update={"l": 12}))
        rep = monte_carlo_on_data("noiseless", X, 8, 0.2, 3, LearnOptions(k=5), seed=4)
        assert rep.trials == 3
        assert math.isnan(rep.mean["edge_f1"])
        with pytest.raises(DomainError):
            monte_carlo_on_data("noiseless", X, 12, 0.2, 3, LearnOptions(k=5))

    def test_row_layout(self):
        row = monte_carlo("raw", self.CFG, trials=2).as_row()
        assert row["method"] == "raw" and row["trials"] == 2
        assert {"mse", "mse_se", "edge_f1", "edge_f1_se"} <= set(row)

    @pytest.mark.slow
    def test_learners_beat_raw_noise(self):
        cfg = SynthConfig(n=20, k_true=40, l=50, sigma=0.5, seed=3)
        raw = monte_carlo("raw", cfg, trials=20).mean["mse"]
        for method in ("noiseless", "altmin", "relax"):
            assert monte_carlo(method, cfg, trials=20).mean["mse"] < raw

    @pytest.mark.slow
    def test_ordering_at_high_noise(self):
        # altmin 은 학습 snapshot 에 과적합해 그래프를 여러 component 로 쪼갠다. held-out MSE 는 noiseless 보다 높다
        cfg = SynthConfig(n=20, k_true=40, l=50, sigma=1.0, seed=3)
        mse = {m: monte_carlo(m, cfg, trials=30).mean["mse"] for m in ("relax", "altmin", "noiseless", "raw")}
        assert mse["relax"] <= mse["altmin"]
        assert mse["relax"] <= mse["noiseless"]
        assert mse["noiseless"] < mse["raw"]

    @pytest.mark.slow
    def test_noiseless_edge_recovery_floor(self):
        f1 = []
        for s in range(50):
            cfg = SynthConfig(n=20, k_true=40, l=50, alpha=10.0, seed=s)
            w_true = plant_graph(cfg)
            X = generate_smooth_signals(w_true, cfg)
            fit = learn_noiseless(X, 40)
            f1.append(evaluate(fit.selection, X, w_true, X).edge_f1)
        assert np.mean(f1) >= 0.60

    @pytest.mark.slow
    def test_mse_grows_with_noise(self):
        cfg = SynthConfig(n=10, k_true=12, l=20, seed=5)
        rows = sweep_sigma(["noiseless"], cfg, [0.1, 0.5, 1.0], trials=30)
        mses = [r["mse"] for r in rows]
        assert mses == sorted(mses)


class TestSweeps:
    def test_sweep_k_monotone(self):
        X = np.random.default_rng(0).standard_normal((8, 5))
        rows = sweep_k(X, range(1, 29))
        vals = [r["smoothness"] for r in rows]
        assert all(b >= a for a, b in zip(vals, vals[1:]))

    def test_sweep_sigma_rows(self):
        cfg = SynthConfig(n=5, k_true=4, l=6, seed=1)
        rows = sweep_sigma(["noiseless", "raw"], cfg, [0.0, 0.2], trials=2)
        assert [(r["sigma"], r["method"]) for r in rows] == [
            (0.0, "noiseless"), (0.0, "raw"), (0.2, "noiseless"), (0.2, "raw"),
        ]
        # 노이즈 없으면 raw denoiser 는 정확
        assert rows[1]["mse"] == 0.0

    def test_head_to_head_structure(self):
        a = head_to_head(3, n=5, l=3, k=3, seed=2)
        b = head_to_head(3, n=5, l=3, k=3, seed=2)
        assert a == b
        assert a["instances"] == 3 and len(a["rows"]) == 3
        assert 0.0 <= a["fraction"] <= 1.0

    @pytest.mark.slow
    def test_head_to_head_fraction(self):
        # r(w) = gamma tr{Y^T L Y} - min_X J 이므로 r 최소화가 joint objective 최소화는 아니다
        res = head_to_head(40, n=6, l=4, k=3, seed=0)
        assert res["relax_not_worse"] == sum(r["relax_not_worse"] for r in res["rows"])
        assert 0.15 <= res["fraction"] <= 0.5
        assert all(r["altmin"] >= 0.0 and r["relax"] >= 0.0 for r in res["rows"])
