import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from millopt.models.ordered import (
    exclusive_leaf_means,
    fit_ordered_boosting,
    prefix_means,
    support_step,
)
from millopt.models.tree import TreeParams


def loop_prefix_means(values, perm, prior):
    out = np.empty(len(values))
    for j, i in enumerate(perm):
        earlier = [values[p] for p in perm[:j]]
        out[i] = np.mean(earlier) if earlier else prior
    return out


def loop_leaf_means(values, leaves, perm):
    out = np.empty(len(values))
    for j, i in enumerate(perm):
        earlier = [values[p] for p in perm[:j] if leaves[p] == leaves[i]]
        out[i] = np.mean(earlier) if earlier else 0.0
    return out


class TestOrderedStatistics:
    def test_prefix_means_match_loop(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(1, 30))
            values = rng.normal(size=n)
            perm = rng.permutation(n)
            assert_allclose(prefix_means(values, perm, 7.0), loop_prefix_means(values, perm, 7.0))

    def test_leaf_means_match_loop(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            n = int(rng.integers(1, 30))
            values = rng.normal(size=n)
            leaves = rng.integers(0, 4, size=n)
            perm = rng.permutation(n)
            assert_allclose(exclusive_leaf_means(values, leaves, perm),
                            loop_leaf_means(values, leaves, perm))

    def test_statistics_never_see_own_target(self):
        rng = np.random.default_rng(2)
        values = rng.normal(size=12)
        perm = rng.permutation(12)
        leaves = rng.integers(0, 2, size=12)
        base_prefix = prefix_means(values, perm, 0.0)
        base_leaf = exclusive_leaf_means(values, leaves, perm)
        for j, i in enumerate(perm):
            changed = values.copy()
            changed[i] += 1000.0
            later = perm[j + 1:]
            unaffected = np.setdiff1d(np.arange(12), later)
            assert_array_equal(prefix_means(changed, perm, 0.0)[unaffected],
                               base_prefix[unaffected])
            assert_array_equal(exclusive_leaf_means(changed, leaves, perm)[unaffected],
                               base_leaf[unaffected])

    def test_support_step_ignores_own_and_later_rows(self):
        rng = np.random.default_rng(6)
        X = rng.uniform(size=(25, 2))
        residual = rng.normal(size=25)
        perm = rng.permutation(25)
        params = TreeParams(max_depth=2)
        base = support_step(X, residual, perm, params)
        assert base[perm[0]] == 0.0
        for j in range(25):
            changed = residual.copy()
            changed[perm[j:]] += rng.normal(0, 100, size=25 - j)
            assert_array_equal(support_step(X, changed, perm, params)[perm[:j + 1]],
                               base[perm[:j + 1]])


class TestOrderedBoosting:
    def test_hand_trace(self):
        X = np.array([[1.0], [2.0], [3.0]])
        y = np.array([1.0, 3.0, 8.0])
        supports = []
        model = fit_ordered_boosting(X, y, n_stages=2, learning_rate=1.0, max_depth=1,
                                     n_permutations=1, seed=0, permutations=[[0, 1, 2]],
                                     callback=lambda c, m, residual, S: supports.append(S))
        assert_allclose(supports[0], [0.0, 1.0, 2.0])
        assert_allclose(supports[1], [0.0, 2.0, 4.0])
        first_stage = model.chains[0].predict(X, n_stages=1)
        assert_allclose(first_stage, [2.0, 2.0, 8.0])

    @staticmethod
    def supports_per_stage(X, y, perm):
        supports = []
        fit_ordered_boosting(X, y, n_stages=3, learning_rate=0.5, max_depth=2, n_permutations=1,
                             seed=0, permutations=[perm],
                             callback=lambda c, m, residual, S: supports.append(S))
        return np.array(supports)

    @pytest.mark.parametrize("shuffle", [False, True])
    def test_supports_never_see_own_target(self, shuffle):
        rng = np.random.default_rng(7)
        X = rng.uniform(-1, 1, size=(20, 2))
        y = np.sin(3 * X[:, 0]) + X[:, 1] + rng.normal(0, 0.1, 20)
        perm = rng.permutation(20) if shuffle else np.arange(20)
        base = self.supports_per_stage(X, y, perm)
        for j, i in enumerate(perm):
            changed = y.copy()
            changed[i] += 50.0
            again = self.supports_per_stage(X, changed, perm)
            earlier_and_own = perm[:j + 1]
            assert_array_equal(again[:, earlier_and_own], base[:, earlier_and_own])

    def test_single_row(self):
        model = fit_ordered_boosting(np.ones((1, 2)), [5.0], 3, 0.5, 2, 1, seed=0)
        assert_allclose(model.predict(np.zeros((2, 2))), [5.0, 5.0])

    def test_prediction_averages_chains(self):
        rng = np.random.default_rng(3)
        X = rng.uniform(size=(60, 2))
        y = X[:, 0] * 3 + rng.normal(0, 0.1, 60)
        model = fit_ordered_boosting(X, y, 10, 0.2, 2, n_permutations=3, seed=4)
        expected = np.mean([chain.predict(X) for chain in model.chains], axis=0)
        assert_allclose(model.predict(X), expected)
        assert len(model.permutations) == 3

    def test_permutations_keyed_by_seed(self):
        X = np.arange(20, dtype=float).reshape(-1, 1)
        y = np.sin(X[:, 0])
        a = fit_ordered_boosting(X, y, 2, 0.1, 2, 2, seed=1)
        b = fit_ordered_boosting(X, y, 2, 0.1, 2, 2, seed=1)
        assert a.permutations == b.permutations
        expected = tuple(np.random.default_rng([1, p]).permutation(20).tolist() for p in (0, 1))
        assert [list(p) for p in a.permutations] == [list(p) for p in expected]

    def test_invalid_explicit_permutation(self):
        X = np.zeros((3, 1))
        with pytest.raises(ValueError):
            fit_ordered_boosting(X, [1.0, 2.0, 3.0], 1, 0.1, 1, 1, 0, permutations=[[0, 0, 1]])

    def test_fits_smooth_signal(self):
        rng = np.random.default_rng(5)
        X = rng.uniform(-2, 2, size=(300, 2))
        y = X[:, 0] ** 2 + X[:, 1] + rng.normal(0, 0.1, 300)
        model = fit_ordered_boosting(X, y, 60, 0.2, 3, n_permutations=2, seed=0)
        assert np.mean((y - model.predict(X)) ** 2) < 0.1 * y.var()
