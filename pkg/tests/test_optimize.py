import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from millopt.errors import ConfigError, DimensionError, FeasibilityError
from millopt.optimize import (
    Bounds,
    DeSettings,
    Evaluator,
    OptimizerConfig,
    binomial_crossover,
    de_mutation,
    de_optimize,
    ga_optimize,
    gaussian_mutation,
    initialize_population,
    latin_hypercube_sample,
    pso_optimize,
    pso_step,
    tournament_select,
    two_point_crossover,
    uniform_sample,
)
from millopt.optimize.sampling import latin_hypercube_unit

OPTIMIZERS = {"de": de_optimize, "ga": ga_optimize, "pso": pso_optimize}


def neg_sphere(X):
    return -np.sum(X ** 2, axis=1)


def neg_rosenbrock(X):
    return -((1 - X[:, 0]) ** 2 + 100 * (X[:, 1] - X[:, 0] ** 2) ** 2)


class TestBounds:
    def setup_method(self):
        self.bounds = Bounds([0.0, -1.0], [1.0, 1.0])

    def test_lower_above_upper(self):
        with pytest.raises(ConfigError):
            Bounds([1.0], [0.0])

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            Bounds([0.0, 0.0], [1.0])

    def test_clip(self):
        assert_array_equal(self.bounds.clip([[2.0, -3.0]]), [[1.0, -1.0]])

    def test_reflect(self):
        out = self.bounds.reflect(np.array([[1.2, 1.5], [-0.3, -1.5], [2.5, 0.0]]))
        assert_allclose(out, [[0.8, 0.5], [0.3, -0.5], [0.5, 0.0]])

    def test_degenerate_dimension(self):
        bounds = Bounds([2.0], [2.0])
        assert_array_equal(bounds.repair(np.array([[5.0]]), "reflect"), [[2.0]])

    def test_initial_population_inside(self):
        population = initialize_population(self.bounds, 100, seed=3)
        X = np.vstack([ind.x for ind in population])
        assert np.all(self.bounds.contains(X))
        assert all(np.isnan(ind.fitness) for ind in population)


class TestEvaluator:
    def test_counts_rows(self):
        evaluate = Evaluator(neg_sphere, Bounds([-1.0], [1.0]))
        evaluate(np.zeros((4, 1)))
        evaluate(np.zeros((3, 1)))
        assert evaluate.evaluations == 7

    def test_rejects_infeasible_rows(self):
        evaluate = Evaluator(neg_sphere, Bounds([-1.0], [1.0]))
        with pytest.raises(FeasibilityError):
            evaluate(np.array([[2.0]]))

    def test_rejects_non_finite_fitness(self):
        evaluate = Evaluator(lambda X: np.full(X.shape[0], np.nan), Bounds([-1.0], [1.0]))
        with pytest.raises(FeasibilityError):
            evaluate(np.zeros((1, 1)))


class TestOperators:
    def test_de_mutation_hand_example(self):
        mutant = de_mutation(np.array([1.0, 1.0]), np.array([3.0, 0.0]), np.array([1.0, 1.0]), 0.5)
        assert_allclose(mutant, [2.0, 0.5])

    def test_crossover_extremes(self):
        rng = np.random.default_rng(0)
        target = np.zeros(6)
        mutant = np.ones(6)
        assert binomial_crossover(target, mutant, 0.0, rng).sum() == 1
        assert_array_equal(binomial_crossover(target, mutant, 1.0, rng), mutant)

    def test_two_point_crossover(self):
        c1, c2 = two_point_crossover(np.zeros(4), np.ones(4), 1, 3)
        assert_array_equal(c1, [0, 1, 1, 0])
        assert_array_equal(c2, [1, 0, 0, 1])

    def test_full_tournament_picks_best(self):
        fitness = np.array([0.3, 0.9, 0.1, 0.5])
        assert tournament_select(fitness, 4, np.random.default_rng(1)) == 1

    def test_mutation_rate_zero(self):
        x = np.array([1.0, 2.0])
        assert_array_equal(gaussian_mutation(x, 0.0, np.ones(2), np.random.default_rng(0)), x)

    def test_pso_hand_step(self):
        x, v = pso_step(np.zeros(1), np.zeros(1), np.ones(1), np.ones(1), w=0.729, c1=1.0, c2=1.0,
                        r1=np.full(1, 0.5), r2=np.full(1, 0.5), v_min=-2.0, v_max=2.0)
        assert_allclose(x, [1.0])
        assert_allclose(v, [1.0])

    def test_pso_velocity_clamp(self):
        x, v = pso_step(np.zeros(1), np.zeros(1), np.full(1, 10.0), np.full(1, 10.0), 0.729, 2.0,
                        2.0, np.ones(1), np.ones(1), -1.0, 1.0)
        assert_allclose(v, [1.0])
        assert_allclose(x, [1.0])


class TestOptimizers:
    def setup_method(self):
        self.bounds = Bounds([-5.0] * 3, [5.0] * 3)

    @pytest.mark.parametrize("algorithm", ["de", "ga", "pso"])
    def test_best_so_far_is_monotone(self, algorithm):
        trace = OPTIMIZERS[algorithm](neg_sphere, self.bounds,
                                      OptimizerConfig(algorithm, population=20, generations=30))
        assert trace.best_so_far.shape == (31,)
        assert np.all(np.diff(trace.best_so_far) >= 0)
        assert_allclose(trace.best.fitness, trace.final_best)
        assert_allclose(neg_sphere(trace.best.x[None, :])[0], trace.best.fitness)

    @pytest.mark.parametrize("algorithm", ["de", "ga", "pso"])
    def test_evaluation_count(self, algorithm):
        trace = OPTIMIZERS[algorithm](neg_sphere, self.bounds,
                                      OptimizerConfig(algorithm, population=25, generations=50))
        assert trace.evaluations == 25 * 51

    @pytest.mark.parametrize("algorithm, floor", [("de", -0.05), ("pso", -1.0), ("ga", -1.0)])
    def test_sphere_converges(self, algorithm, floor):
        trace = OPTIMIZERS[algorithm](neg_sphere, self.bounds,
                                      OptimizerConfig(algorithm, population=25, generations=60))
        assert trace.final_best > floor

    @pytest.mark.parametrize("algorithm", ["de", "ga", "pso"])
    def test_rosenbrock_improves(self, algorithm):
        bounds = Bounds([-2.0, -2.0], [2.0, 2.0])
        trace = OPTIMIZERS[algorithm](neg_rosenbrock, bounds,
                                      OptimizerConfig(algorithm, population=25, generations=50))
        assert trace.final_best > trace.best_so_far[0]
        assert trace.final_best > -2.0

    @pytest.mark.parametrize("algorithm", ["de", "ga", "pso"])
    def test_seeded(self, algorithm):
        config = OptimizerConfig(algorithm, population=10, generations=5, seed=11)
        a = OPTIMIZERS[algorithm](neg_sphere, self.bounds, config)
        b = OPTIMIZERS[algorithm](neg_sphere, self.bounds, config)
        assert_array_equal(a.best_so_far, b.best_so_far)
        assert_array_equal(a.final_positions, b.final_positions)

    @pytest.mark.parametrize("boundary", ["clip", "reflect"])
    def test_points_stay_feasible(self, boundary):
        seen = []
        config = OptimizerConfig("pso", population=15, generations=20, boundary=boundary)
        pso_optimize(neg_sphere, Bounds([1.0, 1.0], [2.0, 2.0]), config,
                     trace_sink=lambda gen, X, fitness: seen.append(X))
        assert len(seen) == 21
        X = np.vstack(seen)
        assert np.all((X >= 1.0) & (X <= 2.0))

    def test_target_strategy(self):
        config = OptimizerConfig("de", population=20, generations=40,
                                 de=DeSettings(strategy="target/1"))
        assert de_optimize(neg_sphere, self.bounds, config).final_best > -0.5

    def test_final_population_sorted(self):
        trace = ga_optimize(neg_sphere, self.bounds, OptimizerConfig("ga", population=12,
                                                                     generations=5))
        fitness = [ind.fitness for ind in trace.final_population()]
        assert fitness == sorted(fitness, reverse=True)
        assert len(fitness) == 12

    @pytest.mark.parametrize("config", [
        OptimizerConfig("de", population=3),
        OptimizerConfig("ga", generations=-1),
        OptimizerConfig("pso", boundary="wrap"),
        OptimizerConfig("de", de=DeSettings(CR=1.5)),
        OptimizerConfig("anneal"),
    ])
    def test_invalid_config(self, config):
        with pytest.raises(ConfigError):
            config.validate()


class TestSamplers:
    def setup_method(self):
        self.bounds = Bounds([0.0, 10.0], [1.0, 20.0])

    def test_latin_hypercube_strata(self):
        u = latin_hypercube_unit(10, 3, np.random.default_rng(0))
        for j in range(3):
            assert_array_equal(np.sort(np.floor(u[:, j] * 10)), np.arange(10))

    def test_lhs_points_inside(self):
        trace = latin_hypercube_sample(lambda X: X[:, 0], self.bounds, 50, seed=1)
        assert np.all(self.bounds.contains(trace.final_positions))
        assert trace.evaluations == 50

    def test_uniform_batches(self):
        trace = uniform_sample(lambda X: X[:, 1], self.bounds, 1250, seed=2, batch=25)
        assert trace.best_so_far.shape == (50,)
        assert np.all(np.diff(trace.best_so_far) >= 0)
        assert trace.final_best == trace.final_fitness.max()

    @pytest.mark.parametrize("n, batch", [(0, None), (10, 0)])
    def test_invalid_sizes(self, n, batch):
        with pytest.raises(ConfigError):
            uniform_sample(neg_sphere, self.bounds, n, seed=0, batch=batch)
