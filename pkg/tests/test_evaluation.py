import time

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from millopt.dataset import kfold_split
from millopt.errors import InvalidFoldCountError
from millopt.evaluation import compare_models, cross_validate, run_ordered, spec_trainer
from millopt.metrics import rank_models
from millopt.models import RegressorSpec
from millopt.synthetic import generate_synthetic_mill

from .conftest import make_dataset


def slow_square(x):
    time.sleep(0.01 * (5 - x))
    return x * x


class TestRunOrdered:
    def test_submission_order_kept(self):
        assert run_ordered(slow_square, range(5), workers=4) == [0, 1, 4, 9, 16]

    def test_serial(self):
        assert run_ordered(slow_square, [3], workers=8) == [9]


class TestCrossValidate:
    def test_exact_linear_data(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(50, 2))
        data = make_dataset(X, X @ [2.0, -1.0] + 0.5)
        result = cross_validate(spec_trainer(RegressorSpec("ols")), data,
                                kfold_split(data, 5, seed=1), name="ols")
        assert len(result.reports) == 5
        assert_allclose(result.metric("r2"), 1.0)
        assert_allclose(result.metric("mse"), 0.0, atol=1e-20)
        assert result.summary.n_folds == 5

    def test_leave_one_out_is_rejected(self, regression_data):
        folds = kfold_split(regression_data, regression_data.n, seed=0)
        with pytest.raises(InvalidFoldCountError) as exc:
            cross_validate(spec_trainer(RegressorSpec("ols")), regression_data, folds)
        assert exc.value.k == regression_data.n

    def test_half_n_folds_still_score(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(12, 2))
        data = make_dataset(X, X @ [1.0, 1.0])
        result = cross_validate(spec_trainer(RegressorSpec("ols")), data,
                                kfold_split(data, 6, seed=0))
        assert len(result.reports) == 6

    def test_workers_do_not_change_scores(self, regression_data):
        folds = kfold_split(regression_data, 4, seed=2)
        trainer = spec_trainer(RegressorSpec("cart", {"max_depth": 3}))
        a = cross_validate(trainer, regression_data, folds, workers=1)
        b = cross_validate(trainer, regression_data, folds, workers=4)
        assert_array_equal(a.metric("rmse"), b.metric("rmse"))


class TestCompareModels:
    def test_shared_folds(self, regression_data):
        roster = {"ols": RegressorSpec("ols"), "tree": RegressorSpec("cart", {"max_depth": 3})}
        results = compare_models(roster, regression_data, k=4, seed=3)
        assert list(results) == ["ols", "tree"]
        alone = cross_validate(spec_trainer(roster["tree"]), regression_data,
                               kfold_split(regression_data, 4, seed=3))
        assert_array_equal(results["tree"].metric("mae"), alone.metric("mae"))

    def test_parallel_matches_serial(self, regression_data):
        roster = {"ols": RegressorSpec("ols"), "knn": RegressorSpec("knn", {"k": 3})}
        a = compare_models(roster, regression_data, k=3, seed=0, workers=1)
        b = compare_models(roster, regression_data, k=3, seed=0, workers=2)
        for name in roster:
            assert_array_equal(a[name].metric("r2"), b[name].metric("r2"))


@pytest.mark.slow
class TestSyntheticMillOrdering:
    def test_boosted_trees_rank_ahead_of_linear_models(self):
        data = generate_synthetic_mill(1500, seed=11)
        roster = {
            "ols": RegressorSpec("ols"),
            "lasso": RegressorSpec("lasso", {"lambda": 1.0}),
            "gbm": RegressorSpec("gbm", {"n_stages": 200, "max_depth": 3}),
            "hgbm": RegressorSpec("hgbm", {"n_stages": 200, "max_depth": 3, "n_bins": 64}),
        }
        results = compare_models(roster, data, k=5, seed=2, workers=2)
        report = rank_models({name: r.reports for name, r in results.items()}, metric="r2")
        assert set(report.ordered()[:2]) == {"gbm", "hgbm"}
        assert report.best in ("gbm", "hgbm")
        for boosted in ("gbm", "hgbm"):
            for linear in ("ols", "lasso"):
                assert (results[boosted].summary.stat("r2", "Median")
                        > results[linear].summary.stat("r2", "Median"))
