import logging
from dataclasses import dataclass, replace
from typing import Iterable, Optional

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist

from .dataset import Dataset, kfold_split
from .errors import DimensionError, EmptyDatasetError, InvalidKError
from .evaluation import Trainer, cross_validate
from .metrics import compute_metrics

log = logging.getLogger(__name__)

# Floor on the mean reachability distance; coincident duplicates end up with LOF 1
LRD_EPSILON = 1e-12
_CHUNK = 1024


# -------------------------------------------------------------------------
# Local outlier factor
# -------------------------------------------------------------------------

@dataclass(frozen=True)
class LofResult:
    scores: np.ndarray
    k: int
    threshold: float

    @property
    def n_outliers(self) -> int:
        return int(np.count_nonzero(self.scores > self.threshold))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "row": np.arange(self.scores.shape[0]),
            "lof": self.scores,
            "outlier": self.scores > self.threshold,
        })


def standardize(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    std = X.std(axis=0)
    std[std == 0] = 1.0
    return (X - X.mean(axis=0)) / std


def nearest_neighbours(Z: np.ndarray, k: int):
    """k-distance neighbourhood of every point, self excluded.

    Returns (k_distance, neighbours, distances). A neighbourhood holds every
    point within the k-distance, so ties at that distance can make it larger
    than k.
    """
    n = Z.shape[0]
    k_distance = np.empty(n)
    neighbours = []
    distances = []
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        block = cdist(Z[start:stop], Z)
        block[np.arange(stop - start), np.arange(start, stop)] = np.inf
        radius = np.partition(block, k - 1, axis=1)[:, k - 1]
        k_distance[start:stop] = radius
        for row, r in zip(block, radius):
            members = np.flatnonzero(row <= r)
            neighbours.append(members)
            distances.append(row[members])
    return k_distance, neighbours, distances


def lof_matrix(X: np.ndarray, k: int, standardized: bool = True) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if k < 1 or k >= n:
        raise InvalidKError(k, n)
    Z = standardize(X) if standardized else X
    k_distance, neighbours, distances = nearest_neighbours(Z, k)
    mean_reach = np.array([np.maximum(k_distance[nb], d).mean()
                           for nb, d in zip(neighbours, distances)])
    lrd = 1.0 / np.maximum(mean_reach, LRD_EPSILON)
    return np.array([lrd[nb].mean() for nb in neighbours]) / lrd


def lof_scores(data: Dataset, k: int, standardized: bool = True,
               contamination: float = 0.01) -> LofResult:
    """LOF per row; the default threshold flags the top `contamination` share of scores."""
    scores = lof_matrix(np.asarray(data.rows), k, standardized)
    threshold = float(np.quantile(scores, 1.0 - contamination))
    log.info("LOF (k=%d): median %.3f, max %.3f, threshold %.3f", k, np.median(scores),
             scores.max(), threshold)
    return LofResult(scores=scores, k=k, threshold=threshold)


def remove_outliers(data: Dataset, result: LofResult, threshold: Optional[float] = None) -> Dataset:
    """Drop rows scoring above `threshold` (default: the result's own); order is preserved."""
    if result.scores.shape[0] != data.n:
        raise DimensionError(data.n, result.scores.shape[0], "LOF scores")
    threshold = result.threshold if threshold is None else threshold
    keep = np.flatnonzero(result.scores <= threshold)
    if keep.size == 0:
        raise EmptyDatasetError("outlier removal")
    log.info("Outlier removal kept %d of %d rows", keep.size, data.n)
    return data.take(keep)


# -------------------------------------------------------------------------
# Recursive feature elimination
# -------------------------------------------------------------------------

def _r2(pred: np.ndarray, actual: np.ndarray) -> float:
    r2 = compute_metrics(pred, actual).r2
    return 0.0 if np.isnan(r2) else r2


def permutation_importance(model, X: np.ndarray, y: np.ndarray, columns: Iterable[int],
                           n_repeats: int, key: tuple) -> np.ndarray:
    """Mean R^2 drop when each column is shuffled.

    `columns` are stable feature ids; column j's shuffles come from
    default_rng([*key, id]) so they do not depend on the other columns.
    """
    baseline = _r2(model.predict(X), y)
    importances = []
    for pos, feature_id in enumerate(columns):
        rng = np.random.default_rng([*key, feature_id])
        drops = []
        for _ in range(n_repeats):
            shuffled = X.copy()
            shuffled[:, pos] = X[rng.permutation(X.shape[0]), pos]
            drops.append(baseline - _r2(model.predict(shuffled), y))
        importances.append(float(np.mean(drops)))
    return np.array(importances)


@dataclass(frozen=True)
class RfeRound:
    features: tuple
    importances: tuple
    eliminated: Optional[str]


@dataclass(frozen=True)
class RfeResult:
    ranking: tuple
    selected: tuple
    eliminated: tuple
    history: tuple
    sweep: Optional[dict] = None

    def to_frame(self) -> pd.DataFrame:
        n_survivors = len(self.selected)
        rows = []
        for rank, name in enumerate(self.ranking, start=1):
            round_eliminated = (self.eliminated.index(name) + 1) if name in self.eliminated else None
            rows.append({"rank": rank, "feature": name, "eliminated_round": round_eliminated,
                         "selected": rank <= n_survivors})
        return pd.DataFrame(rows)

    def to_text(self) -> str:
        lines = [f"Recursive feature elimination: {len(self.selected)} of {len(self.ranking)} kept"]
        lines.append("  selected: " + ", ".join(self.selected))
        if self.eliminated:
            lines.append("  eliminated (in order): " + ", ".join(self.eliminated))
        if self.sweep:
            lines.append(f"  {'K':>4}{'mean R2':>12}{'median R2':>12}")
            for k in sorted(self.sweep):
                mean, median = self.sweep[k]
                lines.append(f"  {k:>4}{mean:>12.4f}{median:>12.4f}")
        return "\n".join(lines)


def rfe(data: Dataset, trainer: Trainer, target_k: int, seed: int, n_repeats: int = 5,
        holdout: float = 0.2) -> RfeResult:
    """Retrain, score permutation importance on a seeded held-out split, drop the weakest, repeat.

    Equal importances drop the feature that comes first in schema order. A
    last round always runs on the survivors so they can be ranked.
    """
    d = data.d
    if not 1 <= target_k <= d:
        raise InvalidKError(target_k, d, "target_k")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(data.n)
    n_test = max(2, int(round(holdout * data.n)))
    test, train = np.sort(perm[:n_test]), np.sort(perm[n_test:])
    if train.size < 1:
        raise EmptyDatasetError("RFE train split")
    train_data, test_data = data.take(train), data.take(test)
    names = data.feature_names

    active = list(range(d))
    eliminated = []
    history = []
    while True:
        current = [names[j] for j in active]
        model = trainer(train_data.select(current))
        X_test = np.array(test_data.select(current).rows)
        importance = permutation_importance(model, X_test, np.asarray(test_data.target), active,
                                            n_repeats, key=(seed, len(eliminated)))
        if len(active) == target_k:
            history.append(RfeRound(tuple(current), tuple(importance), None))
            break
        worst = int(np.argmin(importance))
        dropped = names[active[worst]]
        history.append(RfeRound(tuple(current), tuple(importance), dropped))
        log.debug("RFE round %d: dropping %s (importance %.4g)", len(history), dropped,
                  importance[worst])
        eliminated.append(dropped)
        del active[worst]

    final = history[-1]
    order = np.argsort(-np.asarray(final.importances), kind="stable")
    survivors_ranked = [final.features[i] for i in order]
    ranking = tuple(survivors_ranked + eliminated[::-1])
    selected = tuple(names[j] for j in active)
    log.info("RFE kept %d features; eliminated %s", len(selected), ", ".join(eliminated) or "none")
    return RfeResult(ranking=ranking, selected=selected, eliminated=tuple(eliminated),
                     history=tuple(history))


@dataclass(frozen=True)
class SweepPoint:
    k: int
    features: tuple
    mean_r2: float
    median_r2: float


@dataclass(frozen=True)
class RfeSweep:
    points: tuple
    best_k: int
    rfe: RfeResult

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([{"k": p.k, "mean_r2": p.mean_r2, "median_r2": p.median_r2,
                              "features": ";".join(p.features)} for p in self.points])

    def selected(self, k: Optional[int] = None) -> tuple:
        k = self.best_k if k is None else k
        for point in self.points:
            if point.k == k:
                return point.features
        raise KeyError(k)


def rfe_sweep(data: Dataset, trainer: Trainer, k_range: Iterable[int], folds: int, seed: int,
              workers: int = 1, n_repeats: int = 5, holdout: float = 0.2) -> RfeSweep:
    """Cross-validated R^2 for every K in `k_range`.

    A single elimination run down to min(k_range) supplies every K's
    feature set: elimination does not depend on the target K, so the set for
    K is what survives the first d - K eliminations.
    """
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise InvalidKError(0, data.d, "k_range")
    for k in ks:
        if not 1 <= k <= data.d:
            raise InvalidKError(k, data.d, "k_range")
    base = rfe(data, trainer, ks[0], seed, n_repeats=n_repeats, holdout=holdout)
    assignment = kfold_split(data, folds, seed)

    points = []
    for k in ks:
        dropped = set(base.eliminated[:data.d - k])
        features = tuple(name for name in data.feature_names if name not in dropped)
        cv = cross_validate(trainer, data.select(features), assignment, workers=workers,
                            name=f"K={k}")
        mean = cv.summary.stat("r2", "Mean")
        median = cv.summary.stat("r2", "Median")
        points.append(SweepPoint(k=k, features=features, mean_r2=mean, median_r2=median))
        log.info("RFE sweep K=%d: mean R2 %.4f, median R2 %.4f", k, mean, median)

    means = np.array([p.mean_r2 for p in points])
    best_k = points[int(np.nanargmax(means))].k if np.isfinite(means).any() else ks[-1]
    sweep_map = {p.k: (p.mean_r2, p.median_r2) for p in points}
    base = replace(base, sweep=sweep_map)
    return RfeSweep(points=tuple(points), best_k=best_k, rfe=base)
