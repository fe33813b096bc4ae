import numpy as np
import pytest
from numpy.testing import assert_allclose

from millopt.errors import InvalidKError
from millopt.models import fit_linear_family, knn_predict
from millopt.models.knn import fit_knn
from millopt.models.linear import fit_elastic_net, fit_lasso, fit_ols, fit_sgd

from .conftest import make_dataset


def centred(X, y):
    return X - X.mean(axis=0), y - y.mean()


def standardized(X, y):
    Xc, yc = centred(X, y)
    scale = Xc.std(axis=0)
    return Xc / scale, yc, scale


class TestOls:
    def test_recovers_exact_plane(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(40, 3))
        y = X @ [1.5, -2.0, 0.25] + 7.0
        model = fit_ols(X, y)
        assert_allclose(model.coef, [1.5, -2.0, 0.25], atol=1e-10)
        assert_allclose(model.intercept, 7.0, atol=1e-10)

    def test_rank_deficient_design(self):
        x = np.linspace(0, 1, 10)
        X = np.column_stack([x, x])
        model = fit_ols(X, 4.0 * x)
        # minimum-norm solution splits the weight evenly
        assert_allclose(model.coef, [2.0, 2.0], atol=1e-8)


class TestElasticNet:
    def setup_method(self):
        rng = np.random.default_rng(1)
        self.X = rng.normal(size=(60, 4))
        self.y = self.X @ [3.0, 0.0, -1.0, 0.5] + rng.normal(0, 0.1, 60) + 2.0

    def test_ridge_closed_form(self):
        lambda2 = 3.0
        model, warnings = fit_elastic_net(self.X, self.y, 0.0, lambda2)
        Z, yc, scale = standardized(self.X, self.y)
        expected = np.linalg.solve(Z.T @ Z + 2 * lambda2 * np.eye(4), Z.T @ yc) / scale
        assert_allclose(model.coef, expected, atol=1e-8)
        assert warnings == []

    def test_ridge_closed_form_on_raw_columns(self):
        lambda2 = 3.0
        model, _ = fit_elastic_net(self.X, self.y, 0.0, lambda2, standardize=False)
        Xc, yc = centred(self.X, self.y)
        expected = np.linalg.solve(Xc.T @ Xc + 2 * lambda2 * np.eye(4), Xc.T @ yc)
        assert_allclose(model.coef, expected, atol=1e-8)

    def test_lasso_optimality_conditions(self):
        lam = 15.0
        model, _ = fit_lasso(self.X, self.y, lam)
        Z, yc, scale = standardized(self.X, self.y)
        w = model.coef * scale
        correlation = Z.T @ (yc - Z @ w)
        for j, wj in enumerate(w):
            if wj != 0:
                assert_allclose(correlation[j], lam * np.sign(wj), atol=1e-6)
            else:
                assert abs(correlation[j]) <= lam + 1e-6

    def test_penalty_ignores_column_units(self):
        model, _ = fit_elastic_net(self.X, self.y, 5.0, 1.0)
        rescaled = self.X * [1000.0, 1.0, 0.001, 1.0]
        again, _ = fit_elastic_net(rescaled, self.y, 5.0, 1.0)
        assert_allclose(again.predict(rescaled), model.predict(self.X), rtol=1e-7, atol=1e-7)

    def test_large_penalty_zeroes_everything(self):
        model, _ = fit_lasso(self.X, self.y, 1e6)
        assert np.count_nonzero(model.coef) == 0
        assert_allclose(model.intercept, self.y.mean())

    def test_zero_penalty_reduces_to_ols(self):
        model, _ = fit_elastic_net(self.X, self.y, 0.0, 0.0)
        assert_allclose(model.coef, fit_ols(self.X, self.y).coef, atol=1e-8)

    def test_iteration_cap_warns(self):
        _, warnings = fit_elastic_net(self.X, self.y, 0.1, 0.1, tol=1e-300, max_iter=2)
        assert len(warnings) == 1
        assert "did not converge" in warnings[0]

    def test_warnings_reach_fitted_model(self):
        data = make_dataset(self.X, self.y)
        model = fit_linear_family(data, "lasso", **{"lambda": 0.1, "max_iter": 1, "tol": 1e-300})
        assert model.warnings


class TestSgd:
    def test_approaches_least_squares(self):
        rng = np.random.default_rng(2)
        X = rng.normal(5.0, 2.0, size=(300, 2))
        y = 2.0 * X[:, 0] - X[:, 1] + 3.0
        model = fit_sgd(X, y, 0.01, 50, np.random.default_rng(0))
        assert_allclose(model.coef, [2.0, -1.0], atol=0.05)

    def test_seeded(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(50, 2))
        y = X.sum(axis=1)
        a = fit_sgd(X, y, 0.01, 3, np.random.default_rng(9))
        b = fit_sgd(X, y, 0.01, 3, np.random.default_rng(9))
        assert_allclose(a.coef, b.coef, rtol=0, atol=0)


class TestKnn:
    def setup_method(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([0.0, 10.0, 20.0, 30.0])
        self.model = fit_knn(X, y, k=2)

    def test_uniform_average(self):
        assert_allclose(self.model.predict([[1.1]]), [15.0])

    def test_inverse_distance_on_training_point(self):
        assert_allclose(self.model.predict([[1.0]], weighting="inverse_distance"), [10.0])

    def test_inverse_distance_between_points(self):
        # distances 0.25 and 0.75 on the original scale; standardisation scales both alike
        assert_allclose(self.model.predict([[1.25]], weighting="inverse_distance"), [12.5])

    def test_k_equal_n_predicts_mean(self):
        assert_allclose(self.model.predict([[100.0]], k=4), [15.0])

    @pytest.mark.parametrize("k", [0, 5])
    def test_invalid_k(self, k):
        with pytest.raises(InvalidKError):
            self.model.predict([[0.0]], k=k)

    def test_knn_predict_shapes(self):
        assert isinstance(knn_predict(self.model, [0.9], k=1), float)
        assert knn_predict(self.model, [[0.9], [2.9]], k=1).shape == (2,)
