import numpy as np
import pytest
from numpy.testing import assert_array_equal

from millopt.errors import ConfigError
from millopt.models import fit_gbm
from millopt.optimize import (
    Bounds,
    MethodSpec,
    OptimizerConfig,
    run_campaign,
    run_seed,
    surrogate_objective,
)
from millopt.synthetic import SyntheticMill, generate_synthetic_mill


def neg_sphere(X):
    return -np.sum((X - 1.0) ** 2, axis=1)


def small_methods():
    return [
        MethodSpec("de", "de", OptimizerConfig("de", population=10, generations=10)),
        MethodSpec("pso", "pso", OptimizerConfig("pso", population=10, generations=10)),
        MethodSpec("urs", "uniform", n_samples=110, batch=10),
    ]


class TestMethodSpec:
    def test_default_optimizer(self):
        spec = MethodSpec("ga", "ga")
        assert spec.optimizer.algorithm == "ga"
        assert spec.candidate_count == 25

    def test_sampler_candidate_count(self):
        assert MethodSpec("lhc", "lhs", batch=7).candidate_count == 7

    def test_mismatched_algorithm(self):
        with pytest.raises(ConfigError):
            MethodSpec("de", "de", OptimizerConfig("pso"))

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            MethodSpec("sa", "annealing")


class TestRunSeed:
    def test_independent_streams(self):
        seeds = {run_seed(7, name, run) for name in ("de", "ga", "pso") for run in range(10)}
        assert len(seeds) == 30

    def test_stable(self):
        assert run_seed(7, "de", 3) == run_seed(7, "de", 3)
        assert run_seed(7, "de", 3) != run_seed(8, "de", 3)


class TestCampaign:
    def setup_method(self):
        self.bounds = Bounds([-4.0] * 3, [4.0] * 3)

    def test_results_and_best_method(self):
        result = run_campaign(neg_sphere, self.bounds, small_methods(), runs=4, seed=1)
        assert [r.name for r in result.results] == ["de", "pso", "urs"]
        medians = {r.name: np.median(r.final_bests) for r in result.results}
        assert result.best_method == max(medians, key=medians.get)
        for r in result.results:
            assert len(r.traces) == 4
            assert r.summary()["evaluations"] == 110

    def test_candidates(self):
        result = run_campaign(neg_sphere, self.bounds, small_methods(), runs=3, seed=2,
                              feature_names=["a", "b", "c"])
        frame = result.candidates_frame("throughput")
        assert list(frame.columns) == ["a", "b", "c", "throughput"]
        assert len(frame) == 10
        assert frame["throughput"].is_monotonic_decreasing
        best = result.result(result.best_method)
        assert frame["throughput"].iloc[0] <= best.final_bests.max()

    def test_workers_do_not_change_results(self):
        a = run_campaign(neg_sphere, self.bounds, small_methods(), runs=3, seed=5, workers=1)
        b = run_campaign(neg_sphere, self.bounds, small_methods(), runs=3, seed=5, workers=3)
        for ra, rb in zip(a.results, b.results):
            assert_array_equal(ra.curve_matrix(), rb.curve_matrix())

    def test_frames(self):
        result = run_campaign(neg_sphere, self.bounds, small_methods(), runs=2, seed=3)
        summary = result.summary_frame()
        assert list(summary["method"]) == ["de", "pso", "urs"]
        assert np.all(summary["min"] <= summary["median"])
        assert np.all(summary["median"] <= summary["max"])
        envelope = result.result("de").envelope_frame()
        assert len(envelope) == 11
        assert np.all(envelope["min"] <= envelope["max"])
        assert len(result.result("urs").trace_frame()) == 2 * 11
        assert "best method by median" in result.summary_text()

    @pytest.mark.parametrize("methods, runs", [([], 3), (None, 0)])
    def test_invalid_campaign(self, methods, runs):
        with pytest.raises(ConfigError):
            run_campaign(neg_sphere, self.bounds, small_methods() if methods is None else methods,
                         runs=runs, seed=0)

    def test_duplicate_names(self):
        methods = [MethodSpec("x", "uniform"), MethodSpec("x", "lhs")]
        with pytest.raises(ConfigError):
            run_campaign(neg_sphere, self.bounds, methods, runs=1, seed=0)


class TestSurrogateCampaign:
    @pytest.mark.slow
    def test_optimisers_approach_mill_maximum(self):
        data = generate_synthetic_mill(1500, seed=4, noise_std=10.0)
        model = fit_gbm(data, n_stages=200, learning_rate=0.1, base_depth=4)
        bounds = Bounds.from_features(data.schema)
        methods = [MethodSpec("de", "de", OptimizerConfig("de")),
                   MethodSpec("urs", "uniform")]
        result = run_campaign(surrogate_objective(model), bounds, methods, runs=3, seed=4)
        mill = SyntheticMill()
        best = result.result("de").best_run().best.x
        assert mill.evaluate(best[None, :])[0] > np.percentile(data.target, 90)
        assert np.median(result.result("de").final_bests) >= np.median(
            result.result("urs").final_bests)
