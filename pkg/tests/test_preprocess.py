import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from millopt.errors import DimensionError, InvalidKError
from millopt.evaluation import spec_trainer
from millopt.models import RegressorSpec
from millopt.preprocess import (
    lof_matrix,
    nearest_neighbours,
    lof_scores,
    permutation_importance,
    remove_outliers,
    rfe,
    rfe_sweep,
)
from millopt.synthetic import NUISANCE_FEATURES, generate_synthetic_mill

from .conftest import make_dataset


def naive_lof(X, k):
    """O(n^2) local outlier factor; neighbourhoods keep every point tied at the k-distance."""
    n = X.shape[0]
    dist = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2))
    neighbours = []
    k_distance = np.empty(n)
    for p in range(n):
        k_distance[p] = sorted(dist[p, o] for o in range(n) if o != p)[k - 1]
        neighbours.append([o for o in range(n) if o != p and dist[p, o] <= k_distance[p]])
    lrd = np.empty(n)
    for p in range(n):
        reach = [max(k_distance[o], dist[p, o]) for o in neighbours[p]]
        lrd[p] = 1.0 / max(sum(reach) / len(reach), 1e-12)
    return np.array([sum(lrd[o] for o in neighbours[p]) / len(neighbours[p]) / lrd[p]
                     for p in range(n)])


def planted_outlier():
    grid = np.array([[i, j] for i in range(5) for j in range(5)], dtype=float)
    return np.vstack([grid, [[50.0, 50.0]]])


class TestLof:
    @pytest.mark.slow
    def test_matches_naive_reference(self):
        rng = np.random.default_rng(5)
        for trial in range(50):
            n = int(rng.integers(20, 201))
            d = int(rng.integers(1, 11))
            k = [3, 5, 10][trial % 3]
            X = rng.normal(size=(n, d))
            assert_allclose(lof_matrix(X, k, standardized=False), naive_lof(X, k), rtol=1e-9)

    def test_planted_outlier(self):
        scores = lof_matrix(planted_outlier(), 3, standardized=False)
        assert scores[-1] > 10
        assert np.all(scores[:-1] < 2)

    def test_ties_at_k_distance_join_the_neighbourhood(self):
        X = np.array([[0.0], [1.0], [2.0], [2.5]])
        k_distance, neighbours, _ = nearest_neighbours(X, 1)
        assert_array_equal(neighbours[1], [0, 2])
        assert_allclose(k_distance, [1.0, 1.0, 0.5, 0.5])
        # row 1 averages the densities of both tied neighbours: (1 + 2) / 2
        assert_allclose(lof_matrix(X, 1, standardized=False), [1.0, 1.5, 1.0, 1.0])
        assert_allclose(lof_matrix(X, 1, standardized=False), naive_lof(X, 1))

    def test_duplicates_score_one(self):
        X = np.zeros((6, 2))
        assert_allclose(lof_matrix(X, 2, standardized=False), np.ones(6))

    @pytest.mark.parametrize("k", [0, 26])
    def test_invalid_k(self, k):
        with pytest.raises(InvalidKError):
            lof_matrix(planted_outlier(), k)

    def test_remove_outliers(self):
        X = planted_outlier()
        data = make_dataset(X, np.arange(X.shape[0], dtype=float))
        result = lof_scores(data, 3, standardized=False)
        kept = remove_outliers(data, result, threshold=2.0)
        assert kept.n == 25
        assert_array_equal(kept.target, np.arange(25.0))

    def test_contamination_threshold(self):
        X = planted_outlier()
        data = make_dataset(X, np.zeros(X.shape[0]))
        result = lof_scores(data, 3, standardized=False, contamination=0.02)
        assert result.n_outliers >= 1
        assert result.to_frame()["outlier"].iloc[-1]

    def test_score_length_must_match(self):
        data = make_dataset(planted_outlier(), np.zeros(26))
        result = lof_scores(data, 3)
        with pytest.raises(DimensionError):
            remove_outliers(data.take(np.arange(10)), result)


class TestPermutationImportance:
    def test_irrelevant_column_scores_zero(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(200, 2))
        y = 3.0 * X[:, 0] + rng.normal(0, 0.01, 200)
        data = make_dataset(X, y)
        model = spec_trainer(RegressorSpec("ols"))(data)
        importance = permutation_importance(model, X, y, [0, 1], n_repeats=3, key=(1,))
        assert importance[0] > 1.0
        assert abs(importance[1]) < 0.01

    def test_keyed_shuffles(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(50, 3))
        y = X @ [1.0, 2.0, 3.0]
        model = spec_trainer(RegressorSpec("ols"))(make_dataset(X, y))
        a = permutation_importance(model, X, y, [0, 1, 2], 2, key=(4, 0))
        b = permutation_importance(model, X, y, [0, 1, 2], 2, key=(4, 0))
        c = permutation_importance(model, X, y, [0, 1, 2], 2, key=(4, 1))
        assert_array_equal(a, b)
        assert not np.array_equal(a, c)
        assert np.argmax(a) == 2


class TestRfe:
    def setup_method(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(300, 5))
        y = 4.0 * X[:, 1] + 2.0 * X[:, 3] + rng.normal(0, 0.1, 300)
        self.data = make_dataset(X, y)
        self.trainer = spec_trainer(RegressorSpec("ols"))

    def test_keeps_signal_columns(self):
        result = rfe(self.data, self.trainer, target_k=2, seed=0)
        assert set(result.selected) == {"x1", "x3"}
        assert len(result.eliminated) == 3
        assert result.ranking[:2] == ("x1", "x3")
        assert len(result.history) == 4

    def test_ranking_covers_every_feature(self):
        result = rfe(self.data, self.trainer, target_k=1, seed=0)
        assert sorted(result.ranking) == sorted(self.data.feature_names)
        assert result.selected == ("x1",)
        assert result.to_frame()["selected"].sum() == 1

    def test_deterministic(self):
        a = rfe(self.data, self.trainer, target_k=2, seed=3)
        b = rfe(self.data, self.trainer, target_k=2, seed=3)
        assert a == b

    @pytest.mark.parametrize("k", [0, 6])
    def test_invalid_target(self, k):
        with pytest.raises(InvalidKError):
            rfe(self.data, self.trainer, target_k=k, seed=0)

    def test_sweep(self):
        sweep = rfe_sweep(self.data, self.trainer, range(1, 6), folds=5, seed=0)
        assert [p.k for p in sweep.points] == [1, 2, 3, 4, 5]
        assert sweep.best_k >= 2
        assert {"x1", "x3"} <= set(sweep.selected())
        assert len(sweep.to_frame()) == 5
        assert sweep.rfe.sweep is not None

    @pytest.mark.slow
    def test_recovers_mill_signal_features(self):
        hits = 0
        for seed in range(5):
            data = generate_synthetic_mill(1500, seed=seed, noise_std=10.0)
            trainer = spec_trainer(RegressorSpec("gbm", {"n_stages": 150, "max_depth": 3}))
            result = rfe(data, trainer, target_k=15, seed=seed, n_repeats=3)
            hits += not set(result.selected) & set(NUISANCE_FEATURES)
        assert hits >= 4

    @pytest.mark.slow
    def test_mill_sweep_flattens_after_signal_features(self):
        data = generate_synthetic_mill(1500, seed=11, noise_std=10.0)
        trainer = spec_trainer(RegressorSpec("gbm", {"n_stages": 150, "max_depth": 3}))
        sweep = rfe_sweep(data, trainer, [10, 15, 20], folds=5, seed=11, n_repeats=3)
        r2 = {p.k: p.mean_r2 for p in sweep.points}
        assert r2[15] > r2[10]
        assert abs(r2[20] - r2[15]) < 0.02
