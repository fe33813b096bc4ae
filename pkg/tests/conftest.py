import numpy as np
import pytest

from millopt.dataset import Dataset, FeatureSpec
from millopt.synthetic import generate_synthetic_mill


def make_dataset(X, y, lower=-1e9, upper=1e9, target_bounds=None) -> Dataset:
    """Dataset over generic features x0..x{d-1} with wide bounds."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    schema = [FeatureSpec(f"x{j}", "-", lower, upper) for j in range(X.shape[1])]
    target_spec = FeatureSpec("y", "-", *target_bounds) if target_bounds else None
    return Dataset(schema, X, np.asarray(y, dtype=float), "y", target_spec)


def random_regression(seed: int, n: int = 80, d: int = 4, noise: float = 0.1) -> Dataset:
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2, 2, size=(n, d))
    coef = rng.normal(size=d)
    y = X @ coef + np.sin(X[:, 0]) * 2 + rng.normal(0, noise, size=n)
    return make_dataset(X, y)


@pytest.fixture
def small_mill():
    return generate_synthetic_mill(300, seed=3, noise_std=5.0)


@pytest.fixture
def regression_data():
    return random_regression(0)


def small_config(output_dir, **changes) -> dict:
    """Raw pipeline config small enough to run every stage in a few seconds."""
    raw = {
        "seed": 3,
        "output_dir": str(output_dir),
        "data": {"n": 240, "synthetic_seed": 5, "noise_std": 10.0, "stats_bins": 8},
        "cv": {"k": 3},
        "roster": [
            {"name": "ols", "family": "ols"},
            {"name": "cart", "family": "cart", "hyperparameters": {"max_depth": 5}},
            {"name": "gbm", "family": "gbm", "hyperparameters": {"n_stages": 30}},
        ],
        "selection": {"best_of_refits": 2},
        "lof": {"k": 10},
        "rfe": {"k_min": 17, "k_max": 18, "n_repeats": 1},
        "campaign": {
            "runs": 2,
            "methods": [
                {"name": "de", "kind": "de", "population": 6, "generations": 3},
                {"name": "urs", "kind": "uniform", "n_samples": 24, "batch": 6},
            ],
        },
    }
    for section, values in changes.items():
        if isinstance(values, dict):
            raw.setdefault(section, {}).update(values)
        else:
            raw[section] = values
    return raw
