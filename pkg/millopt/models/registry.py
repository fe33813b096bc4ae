"""Model roster: family table, hyperparameter validation and the fit/predict surface.

Family defaults:

    ols              -
    lasso            lambda 1.0, tol 1e-10, max_iter 10000
    elastic_net      lambda1 1.0, lambda2 1.0, tol 1e-10, max_iter 10000
    sgd              learning_rate 0.01, epochs 20
    knn              k 5, weighting uniform
    cart             max_depth None (unlimited), min_samples_leaf 1, ccp_alpha 0
    random_forest    100 trees, max_features 0.5, max_depth 8, min_samples_leaf 5, bootstrap
    extra_trees      100 trees, max_features None (all), max_depth 8, min_samples_leaf 5
    adaboost_r2      50 estimators, base_depth 3
    gbm              100 stages, learning_rate 0.1, max_depth 3
    regularized_gbm  100 stages, learning_rate 0.1, max_depth 6, gamma 0, alpha 0, lambda 1
    hgbm             100 stages, learning_rate 0.1, max_depth 5, n_bins 255
    ordered_gbm      100 stages, learning_rate 0.1, max_depth 6, n_permutations 4
"""
import logging
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from ..dataset import Dataset
from ..errors import DimensionError, SpecError, UnimplementedFamilyError
from . import boosting, forest, knn, linear, ordered

log = logging.getLogger(__name__)

_BOOST = {"n_stages": 100, "learning_rate": 0.1, "min_samples_leaf": 1}

FAMILY_DEFAULTS = {
    "ols": {},
    "lasso": {"lambda": 1.0, "tol": 1e-10, "max_iter": 10000},
    "elastic_net": {"lambda1": 1.0, "lambda2": 1.0, "tol": 1e-10, "max_iter": 10000},
    "sgd": {"learning_rate": 0.01, "epochs": 20},
    "knn": {"k": 5, "weighting": "uniform"},
    "cart": {"max_depth": None, "min_samples_leaf": 1, "ccp_alpha": 0.0},
    "random_forest": {"n_trees": 100, "max_features": 0.5, "max_depth": 8,
                      "min_samples_leaf": 5, "bootstrap": True},
    "extra_trees": {"n_trees": 100, "max_features": None, "max_depth": 8,
                    "min_samples_leaf": 5},
    "adaboost_r2": {"n_estimators": 50, "base_depth": 3},
    "gbm": {**_BOOST, "max_depth": 3},
    "regularized_gbm": {**_BOOST, "max_depth": 6, "gamma": 0.0, "alpha": 0.0, "lambda": 1.0},
    "hgbm": {**_BOOST, "max_depth": 5, "n_bins": 255},
    "ordered_gbm": {**_BOOST, "max_depth": 6, "n_permutations": 4, "permutations": None},
}

UNIMPLEMENTED_FAMILIES = {
    "svm": "support vector regression needs a quadratic-program solver and is out of scope",
    "bayesian": "Bayesian regression is out of scope",
    "mlp": "multilayer perceptrons are out of scope",
    "lstm": "LSTM networks are out of scope",
}

FAMILIES = tuple(FAMILY_DEFAULTS)

_POSITIVE_INT = {"n_trees", "n_estimators", "n_stages", "n_permutations", "epochs", "k",
                 "min_samples_leaf", "max_iter", "n_bins"}
_NON_NEGATIVE_INT = {"base_depth"}
_NON_NEGATIVE_FLOAT = {"lambda", "lambda1", "lambda2", "gamma", "alpha", "ccp_alpha"}
_POSITIVE_FLOAT = {"tol"}


def _is_int(value) -> bool:
    return isinstance(value, (int, np.integer)) and not isinstance(value, bool)


def _is_number(value) -> bool:
    return isinstance(value, (int, float, np.integer, np.floating)) and not isinstance(value, bool)


def _check_value(family: str, key: str, value) -> None:
    def fail(message):
        raise SpecError(family, f"{key}={value!r}: {message}", key)

    if key in _POSITIVE_INT:
        if not _is_int(value) or value < 1:
            fail("must be an integer >= 1")
    elif key in _NON_NEGATIVE_INT:
        if not _is_int(value) or value < 0:
            fail("must be an integer >= 0")
    elif key == "max_depth":
        if value is not None and (not _is_int(value) or value < 0):
            fail("must be None or an integer >= 0")
    elif key in _NON_NEGATIVE_FLOAT:
        if not _is_number(value) or value < 0:
            fail("must be >= 0")
    elif key in _POSITIVE_FLOAT:
        if not _is_number(value) or value <= 0:
            fail("must be > 0")
    elif key == "learning_rate":
        if not _is_number(value) or value <= 0:
            fail("must be > 0")
        if family != "sgd" and value > 1:
            fail("boosting learning rate must lie in (0, 1]")
    elif key == "weighting":
        if value not in knn.WEIGHTINGS:
            fail(f"must be one of {', '.join(knn.WEIGHTINGS)}")
    elif key == "max_features":
        if value is None:
            return
        if isinstance(value, float):
            if not 0 < value <= 1:
                fail("a fractional max_features must lie in (0, 1]")
        elif not _is_int(value) or value < 1:
            fail("must be None, an integer >= 1 or a fraction in (0, 1]")
    elif key == "bootstrap":
        if not isinstance(value, bool):
            fail("must be a boolean")
    elif key == "permutations":
        if value is not None and (not isinstance(value, (list, tuple)) or not value):
            fail("must be None or a non-empty list of permutations")


@dataclass(frozen=True)
class RegressorSpec:
    family: str
    hyperparameters: Mapping = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILY_DEFAULTS and self.family not in UNIMPLEMENTED_FAMILIES:
            raise SpecError(self.family, "unknown model family")
        params = dict(self.hyperparameters or {})
        if self.family in FAMILY_DEFAULTS:
            allowed = FAMILY_DEFAULTS[self.family]
            for key, value in params.items():
                if key not in allowed:
                    raise SpecError(self.family, f"unknown hyperparameter '{key}'", key)
                _check_value(self.family, key, value)
        object.__setattr__(self, "hyperparameters", MappingProxyType(params))

    @property
    def implemented(self) -> bool:
        return self.family in FAMILY_DEFAULTS

    def params(self) -> dict:
        """Declared defaults overlaid with the explicit hyperparameters."""
        merged = dict(FAMILY_DEFAULTS.get(self.family, {}))
        merged.update(self.hyperparameters)
        return merged

    def as_dict(self) -> dict:
        return {"family": self.family, "hyperparameters": dict(self.hyperparameters),
                "seed": self.seed}


@dataclass(frozen=True)
class FittedModel:
    spec: RegressorSpec
    feature_names: tuple
    estimator: object
    warnings: tuple = ()

    def check_rows(self, rows) -> np.ndarray:
        rows = np.asarray(rows, dtype=float)
        if rows.ndim == 1:
            rows = rows.reshape(1, -1)
        if rows.ndim != 2 or rows.shape[1] != len(self.feature_names):
            raise DimensionError(len(self.feature_names), rows.shape[-1], "prediction rows")
        if not np.all(np.isfinite(rows)):
            raise ValueError("Prediction rows must be finite")
        return rows

    def predict(self, rows) -> np.ndarray:
        return np.asarray(self.estimator.predict(self.check_rows(rows)), dtype=float)

    def describe(self) -> dict:
        info = {"family": self.spec.family, "n_features": len(self.feature_names)}
        info.update(self.estimator.describe())
        return info


def predict(model: FittedModel, rows) -> np.ndarray:
    return model.predict(rows)


# -------------------------------------------------------------------------
# Training dispatch
# -------------------------------------------------------------------------

def _train(family: str, p: dict, seed: int, X: np.ndarray, y: np.ndarray):
    """Returns (estimator, warnings)."""
    if family == "ols":
        return linear.fit_ols(X, y), []
    if family == "lasso":
        return linear.fit_lasso(X, y, p["lambda"], tol=p["tol"], max_iter=p["max_iter"])
    if family == "elastic_net":
        return linear.fit_elastic_net(X, y, p["lambda1"], p["lambda2"], tol=p["tol"],
                                      max_iter=p["max_iter"])
    if family == "sgd":
        return linear.fit_sgd(X, y, p["learning_rate"], p["epochs"],
                              np.random.default_rng(seed)), []
    if family == "knn":
        return knn.fit_knn(X, y, p["k"], p["weighting"]), []
    if family == "cart":
        return forest.fit_cart_tree(X, y, p["max_depth"], p["min_samples_leaf"],
                                    p["ccp_alpha"]), []
    if family in ("random_forest", "extra_trees"):
        if _is_int(p["max_features"]) and p["max_features"] > X.shape[1]:
            raise SpecError(family, f"max_features={p['max_features']} exceeds d={X.shape[1]}",
                            "max_features")
        if family == "random_forest":
            return forest.fit_random_forest(X, y, p["n_trees"], p["max_features"], p["max_depth"],
                                            p["min_samples_leaf"], p["bootstrap"], seed), []
        return forest.fit_extra_trees(X, y, p["n_trees"], p["max_features"], p["max_depth"],
                                      p["min_samples_leaf"], seed), []
    if family == "adaboost_r2":
        return boosting.fit_adaboost(X, y, p["n_estimators"], p["base_depth"], seed)
    if family == "gbm":
        return boosting.fit_gbm_trees(X, y, p["n_stages"], p["learning_rate"], p["max_depth"],
                                      p["min_samples_leaf"]), []
    if family == "regularized_gbm":
        return boosting.fit_regularized_trees(X, y, p["n_stages"], p["learning_rate"],
                                              p["max_depth"], p["gamma"], p["alpha"],
                                              p["lambda"], p["min_samples_leaf"]), []
    if family == "hgbm":
        return boosting.fit_histogram_trees(X, y, p["n_stages"], p["learning_rate"],
                                            p["max_depth"], p["n_bins"],
                                            p["min_samples_leaf"]), []
    if family == "ordered_gbm":
        return ordered.fit_ordered_boosting(X, y, p["n_stages"], p["learning_rate"],
                                            p["max_depth"], p["n_permutations"], seed,
                                            p["min_samples_leaf"], p["permutations"]), []
    raise SpecError(family, "no trainer registered")


def fit(spec: RegressorSpec, data: Dataset) -> FittedModel:
    if not spec.implemented:
        raise UnimplementedFamilyError(spec.family, UNIMPLEMENTED_FAMILIES[spec.family])
    X = np.asarray(data.rows)
    y = np.asarray(data.target)
    estimator, warnings = _train(spec.family, spec.params(), spec.seed, X, y)
    for message in warnings:
        log.warning("%s: %s", spec.family, message)
    return FittedModel(spec=spec, feature_names=data.feature_names, estimator=estimator,
                       warnings=tuple(warnings))


# -------------------------------------------------------------------------
# Per-family conveniences
# -------------------------------------------------------------------------

def fit_linear_family(data: Dataset, variant: str, seed: int = 0, **hyperparameters) -> FittedModel:
    if variant not in ("ols", "lasso", "elastic_net", "sgd"):
        raise SpecError(variant, "not a linear family")
    return fit(RegressorSpec(variant, hyperparameters, seed), data)


def fit_cart(data: Dataset, max_depth=None, min_samples_leaf: int = 1,
             ccp_alpha: float = 0.0) -> FittedModel:
    return fit(RegressorSpec("cart", {"max_depth": max_depth, "min_samples_leaf": min_samples_leaf,
                                      "ccp_alpha": ccp_alpha}), data)


def fit_forest(data: Dataset, variant: str, n_trees: int, max_features=None, seed: int = 0,
               **hyperparameters) -> FittedModel:
    if variant not in ("random_forest", "extra_trees"):
        raise SpecError(variant, "not a forest family")
    params = {"n_trees": n_trees, "max_features": max_features, **hyperparameters}
    return fit(RegressorSpec(variant, params, seed), data)


def fit_adaboost_r2(data: Dataset, n_estimators: int, base_depth: int, seed: int = 0) -> FittedModel:
    return fit(RegressorSpec("adaboost_r2", {"n_estimators": n_estimators,
                                             "base_depth": base_depth}, seed), data)


def fit_gbm(data: Dataset, n_stages: int, learning_rate: float, base_depth: int) -> FittedModel:
    return fit(RegressorSpec("gbm", {"n_stages": n_stages, "learning_rate": learning_rate,
                                     "max_depth": base_depth}), data)


def fit_regularized_gbm(data: Dataset, n_stages: int, learning_rate: float, gamma: float,
                        alpha: float, lam: float, max_depth: int) -> FittedModel:
    return fit(RegressorSpec("regularized_gbm", {
        "n_stages": n_stages, "learning_rate": learning_rate, "gamma": gamma,
        "alpha": alpha, "lambda": lam, "max_depth": max_depth}), data)


def fit_hgbm(data: Dataset, n_stages: int, learning_rate: float, n_bins: int,
             max_depth: int) -> FittedModel:
    return fit(RegressorSpec("hgbm", {"n_stages": n_stages, "learning_rate": learning_rate,
                                      "n_bins": n_bins, "max_depth": max_depth}), data)


def fit_ordered_gbm(data: Dataset, n_stages: int, learning_rate: float, n_permutations: int,
                    base_depth: int, seed: int = 0,
                    permutations: Sequence[Sequence[int]] = None) -> FittedModel:
    params = {"n_stages": n_stages, "learning_rate": learning_rate,
              "n_permutations": n_permutations, "max_depth": base_depth}
    if permutations is not None:
        params["permutations"] = [list(map(int, p)) for p in permutations]
    return fit(RegressorSpec("ordered_gbm", params, seed), data)
