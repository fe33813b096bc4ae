import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from ..errors import InvalidKError

log = logging.getLogger(__name__)

WEIGHTINGS = ("uniform", "inverse_distance")
_CHUNK = 512


@dataclass(frozen=True)
class KnnModel:
    """Stored training set on standardised axes (population std, zero std -> 1)."""

    mean: np.ndarray
    scale: np.ndarray
    train: np.ndarray
    target: np.ndarray
    k: int
    weighting: str = "uniform"

    @property
    def n_train(self) -> int:
        return int(self.target.shape[0])

    def neighbours(self, X: np.ndarray, k: int):
        """(indices, distances) of the k nearest rows; equal distances keep training order."""
        Z = (np.asarray(X, dtype=float) - self.mean) / self.scale
        idx_out = np.empty((Z.shape[0], k), dtype=np.int64)
        dist_out = np.empty((Z.shape[0], k))
        for start in range(0, Z.shape[0], _CHUNK):
            dist = cdist(Z[start:start + _CHUNK], self.train)
            order = np.argsort(dist, axis=1, kind="stable")[:, :k]
            idx_out[start:start + _CHUNK] = order
            dist_out[start:start + _CHUNK] = np.take_along_axis(dist, order, axis=1)
        return idx_out, dist_out

    def predict(self, X: np.ndarray, k: int = None, weighting: str = None) -> np.ndarray:
        k = self.k if k is None else int(k)
        weighting = weighting or self.weighting
        if not 1 <= k <= self.n_train:
            raise InvalidKError(k, self.n_train)
        if weighting not in WEIGHTINGS:
            raise ValueError(f"Unknown weighting '{weighting}'")
        idx, dist = self.neighbours(X, k)
        values = self.target[idx]
        if weighting == "uniform":
            return values.mean(axis=1)
        exact = dist == 0
        with np.errstate(divide="ignore"):
            weights = np.where(exact, 0.0, 1.0 / np.where(exact, 1.0, dist))
        weighted = (weights * values).sum(axis=1) / np.where(exact.any(axis=1), 1.0,
                                                             weights.sum(axis=1))
        # a query sitting on training points takes the mean of those points
        on_point = exact.any(axis=1)
        if on_point.any():
            hits = exact[on_point]
            weighted[on_point] = (values[on_point] * hits).sum(axis=1) / hits.sum(axis=1)
        return weighted

    def to_state(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "train": self.train.tolist(),
            "target": self.target.tolist(),
            "k": self.k,
            "weighting": self.weighting,
        }

    @classmethod
    def from_state(cls, state: dict) -> "KnnModel":
        return cls(
            mean=np.asarray(state["mean"], dtype=float),
            scale=np.asarray(state["scale"], dtype=float),
            train=np.asarray(state["train"], dtype=float),
            target=np.asarray(state["target"], dtype=float),
            k=int(state["k"]),
            weighting=state["weighting"],
        )

    def describe(self) -> dict:
        return {"n_train": self.n_train, "k": self.k, "weighting": self.weighting}


def fit_knn(X, y, k: int, weighting: str = "uniform") -> KnnModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if not 1 <= k <= X.shape[0]:
        raise InvalidKError(k, X.shape[0])
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    return KnnModel(mean=mean, scale=scale, train=(X - mean) / scale, target=y.copy(),
                    k=int(k), weighting=weighting)


def knn_predict(model, x, k: int, weighting: str = "uniform"):
    """k-nearest-neighbour prediction for a fitted KNN model (or its estimator).

    A single feature vector returns a float, a matrix returns a vector.
    """
    estimator = getattr(model, "estimator", model)
    if not isinstance(estimator, KnnModel):
        raise TypeError("knn_predict needs a fitted knn model")
    x = np.asarray(x, dtype=float)
    if hasattr(model, "check_rows"):
        rows = model.check_rows(np.atleast_2d(x))
    else:
        rows = np.atleast_2d(x)
    out = estimator.predict(rows, k=k, weighting=weighting)
    return float(out[0]) if x.ndim == 1 else out
