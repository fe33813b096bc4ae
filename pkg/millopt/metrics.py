import logging
import math
from dataclasses import asdict, dataclass, fields
from typing import Mapping, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from .errors import DegenerateDifferenceError, DimensionError, InsufficientDataError

log = logging.getLogger(__name__)

UNDEFINED = float("nan")

# Metrics where a larger value means a better model
HIGHER_IS_BETTER = {"pearson_r", "r2", "evs"}


@dataclass(frozen=True)
class MetricReport:
    """Regression metrics for one prediction/actual pair.

    Undefined values (Pearson r on constant input, MAPE on a zero actual,
    MSLE on values <= -1) are NaN.
    """

    mse: float
    rmse: float
    mae: float
    mape: float
    smape: float
    pearson_r: float
    r2: float
    evs: float
    msle: float

    def as_dict(self) -> dict:
        return asdict(self)


METRIC_NAMES = tuple(f.name for f in fields(MetricReport))


def _as_vector(values, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise DimensionError("1-D vector", arr.shape, what)
    return arr


def compute_metrics(pred, actual, mape_epsilon: Optional[float] = None) -> MetricReport:
    pred = _as_vector(pred, "pred")
    actual = _as_vector(actual, "actual")
    if pred.shape != actual.shape:
        raise DimensionError(actual.shape[0], pred.shape[0], "pred")
    if actual.shape[0] < 2:
        raise DimensionError(">= 2", actual.shape[0], "vector length")

    err = actual - pred
    abs_err = np.abs(err)
    mse = float(np.mean(err ** 2))
    mae = float(np.mean(abs_err))

    if mape_epsilon is not None:
        mape = float(np.mean(abs_err / np.maximum(np.abs(actual), mape_epsilon)) * 100.0)
    elif np.any(actual == 0):
        mape = UNDEFINED
    else:
        mape = float(np.mean(abs_err / np.abs(actual)) * 100.0)

    denom = (np.abs(actual) + np.abs(pred)) / 2.0
    safe = np.where(denom == 0, 1.0, denom)
    smape = float(np.mean(np.where(denom == 0, 0.0, abs_err / safe)) * 100.0)

    dp = pred - pred.mean()
    da = actual - actual.mean()
    ss_pred = float(np.sum(dp ** 2))
    ss_tot = float(np.sum(da ** 2))
    if ss_pred == 0 or ss_tot == 0:
        pearson_r = UNDEFINED
    else:
        pearson_r = float(np.clip(np.sum(dp * da) / math.sqrt(ss_pred * ss_tot), -1.0, 1.0))

    if ss_tot == 0:
        r2 = UNDEFINED
        evs = UNDEFINED
    else:
        r2 = 1.0 - float(np.sum(err ** 2)) / ss_tot
        evs = 1.0 - float(np.var(err)) / float(np.var(actual))

    if np.any(pred <= -1) or np.any(actual <= -1):
        msle = UNDEFINED
    else:
        msle = float(np.mean((np.log1p(pred) - np.log1p(actual)) ** 2))

    return MetricReport(
        mse=mse, rmse=math.sqrt(mse), mae=mae, mape=mape, smape=smape,
        pearson_r=pearson_r, r2=r2, evs=evs, msle=msle,
    )


# -------------------------------------------------------------------------
# Fold aggregation
# -------------------------------------------------------------------------

SUMMARY_ROWS = ("Min", "Max", "Mean", "Median", "STD")


@dataclass(frozen=True)
class FoldSummary:
    """Per-metric min/max/mean/median/std over folds (NaN folds ignored)."""

    n_folds: int
    values: dict  # metric -> {"Min": .., "Max": .., ...}

    def stat(self, metric: str, row: str) -> float:
        return self.values[metric][row]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.values).loc[list(SUMMARY_ROWS), list(METRIC_NAMES)]
        frame.index.name = "stat"
        return frame

    def to_table(self, title: str = "") -> str:
        width = 11
        lines = []
        if title:
            lines.append(title)
        lines.append(f"{'':<8}" + "".join(f"{m:>{width}}" for m in METRIC_NAMES))
        for row in SUMMARY_ROWS:
            cells = []
            for m in METRIC_NAMES:
                v = self.values[m][row]
                cells.append(f"{'NaN':>{width}}" if math.isnan(v) else f"{v:>{width}.2E}")
            lines.append(f"{row:<8}" + "".join(cells))
        return "\n".join(lines)

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path)


def _summarize_column(values: np.ndarray) -> dict:
    finite = values[~np.isnan(values)]
    if finite.size == 0:
        return {row: UNDEFINED for row in SUMMARY_ROWS}
    std = float(np.std(finite, ddof=1)) if finite.size > 1 else 0.0
    return {
        "Min": float(np.min(finite)),
        "Max": float(np.max(finite)),
        "Mean": float(np.mean(finite)),
        "Median": float(np.median(finite)),
        "STD": std,
    }


def summarize_folds(reports: Sequence[MetricReport]) -> FoldSummary:
    if not reports:
        raise InsufficientDataError("Cannot summarize an empty list of fold reports")
    table = np.array([[getattr(r, m) for m in METRIC_NAMES] for r in reports], dtype=float)
    values = {m: _summarize_column(table[:, j]) for j, m in enumerate(METRIC_NAMES)}
    return FoldSummary(n_folds=len(reports), values=values)


def folds_frame(reports: Sequence[MetricReport]) -> pd.DataFrame:
    """One row per fold, one column per metric."""
    frame = pd.DataFrame([r.as_dict() for r in reports], columns=list(METRIC_NAMES))
    frame.index = pd.RangeIndex(1, len(reports) + 1, name="fold")
    return frame


# -------------------------------------------------------------------------
# Statistical ranking
# -------------------------------------------------------------------------

@dataclass(frozen=True)
class FriedmanResult:
    average_rank: np.ndarray
    statistic: float
    p_value: float


def friedman_average_ranks(scores, higher_is_better: bool = True) -> FriedmanResult:
    """Average within-run ranks (1 = best) and the chi-square Friedman statistic."""
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 2:
        raise DimensionError("runs x models matrix", scores.shape, "scores")
    n_runs, n_models = scores.shape
    if n_models < 2 or n_runs < 2:
        raise InsufficientDataError(
            f"Friedman ranking needs >= 2 models and >= 2 runs, got {n_models} x {n_runs}"
        )
    keyed = -scores if higher_is_better else scores
    ranks = np.vstack([stats.rankdata(row, method="average") for row in keyed])
    average = ranks.mean(axis=0)
    k = n_models
    statistic = 12.0 * n_runs / (k * (k + 1)) * (np.sum(average ** 2) - k * (k + 1) ** 2 / 4.0)
    statistic = float(max(statistic, 0.0))
    p_value = float(stats.chi2.sf(statistic, k - 1))
    return FriedmanResult(average_rank=average, statistic=statistic, p_value=p_value)


def paired_t_test(a, b) -> float:
    """Two-sided p-value of the paired-differences t statistic."""
    a = _as_vector(a, "a")
    b = _as_vector(b, "b")
    if a.shape != b.shape:
        raise DimensionError(a.shape[0], b.shape[0], "b")
    n = a.shape[0]
    if n < 2:
        raise InsufficientDataError("Paired t-test needs at least 2 pairs")
    diff = a - b
    if np.all(diff == 0):
        raise DegenerateDifferenceError()
    mean = float(np.mean(diff))
    sd = float(np.std(diff, ddof=1))
    if sd == 0:
        return 0.0
    t = mean / (sd / math.sqrt(n))
    p = 2.0 * float(stats.t.sf(abs(t), n - 1))
    return float(min(max(p, 0.0), 1.0))


@dataclass(frozen=True)
class RankReport:
    models: tuple
    average_rank: np.ndarray
    friedman_statistic: float
    friedman_p: float
    pairwise_p: dict
    metric: str
    best: str

    def ordered(self) -> list:
        """Model names from best to worst average rank (stable on ties)."""
        order = np.argsort(self.average_rank, kind="stable")
        return [self.models[i] for i in order]

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {"model": m, "average_rank": float(self.average_rank[i]),
             "p_value": self.pairwise_p[m]}
            for i, m in enumerate(self.models)
        ]
        return pd.DataFrame(rows).sort_values("average_rank", kind="stable").reset_index(drop=True)

    def to_text(self) -> str:
        width = max(len(m) for m in self.models) + 2
        lines = [
            f"Friedman ranking on {self.metric} "
            f"(statistic {self.friedman_statistic:.4f}, p = {self.friedman_p:.4g})",
            f"{'Model':<{width}}{'Avg rank':>10}{'P-value (T-test)':>20}",
        ]
        for _, row in self.to_frame().iterrows():
            p = row["p_value"]
            cell = "-" if math.isnan(p) else f"{p:.4g}"
            lines.append(f"{row['model']:<{width}}{row['average_rank']:>10.2f}{cell:>20}")
        return "\n".join(lines)


def rank_models(fold_scores: Mapping[str, Sequence[MetricReport]],
                metric: str = "pearson_r") -> RankReport:
    """Friedman-rank models on one metric over paired folds, then t-test each against the best.

    Undefined per-fold scores are ranked as 0.0. A model whose fold scores
    are identical to the best model's gets p = 1.
    """
    if metric not in METRIC_NAMES:
        raise KeyError(metric)
    models = tuple(fold_scores)
    columns = []
    for name in models:
        values = np.array([getattr(r, metric) for r in fold_scores[name]], dtype=float)
        columns.append(np.nan_to_num(values, nan=0.0))
    lengths = {len(c) for c in columns}
    if len(lengths) != 1:
        raise DimensionError("equal fold counts", sorted(lengths), "fold scores")
    scores = np.column_stack(columns)
    friedman = friedman_average_ranks(scores, higher_is_better=metric in HIGHER_IS_BETTER)

    best_idx = int(np.argsort(friedman.average_rank, kind="stable")[0])
    best = models[best_idx]
    pairwise = {}
    for j, name in enumerate(models):
        if j == best_idx:
            pairwise[name] = UNDEFINED
            continue
        try:
            pairwise[name] = paired_t_test(scores[:, j], scores[:, best_idx])
        except DegenerateDifferenceError:
            pairwise[name] = 1.0
    log.info("Best ranked model on %s: %s (avg rank %.2f)", metric, best,
             friedman.average_rank[best_idx])
    return RankReport(
        models=models,
        average_rank=friedman.average_rank,
        friedman_statistic=friedman.statistic,
        friedman_p=friedman.p_value,
        pairwise_p=pairwise,
        metric=metric,
        best=best,
    )
