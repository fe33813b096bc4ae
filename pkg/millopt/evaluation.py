import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional

import numpy as np

from .dataset import Dataset, FoldAssignment, kfold_split
from .errors import InvalidFoldCountError
from .metrics import FoldSummary, MetricReport, compute_metrics, summarize_folds
from .models import FittedModel, RegressorSpec, fit

log = logging.getLogger(__name__)

Trainer = Callable[[Dataset], FittedModel]


def spec_trainer(spec: RegressorSpec) -> Trainer:
    """Model factory that fits `spec` on whatever dataset it is handed."""
    def train(data: Dataset) -> FittedModel:
        return fit(spec, data)
    train.spec = spec
    return train


def run_ordered(func: Callable, items: Iterable, workers: int = 1) -> list:
    """Map `func` over `items`; results come back in submission order for any pool size."""
    items = list(items)
    if workers is None or workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(func, item) for item in items]
        return [f.result() for f in futures]


@dataclass(frozen=True)
class CvResult:
    name: str
    reports: tuple
    summary: FoldSummary

    def metric(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.reports], dtype=float)


def cross_validate(trainer: Trainer, data: Dataset, folds: FoldAssignment, workers: int = 1,
                   name: str = "", mape_epsilon: Optional[float] = None) -> CvResult:
    """Fit on k-1 folds, score on the held-out fold, for every fold.

    Every held-out fold needs at least 2 rows for its correlation metrics, so
    k above n/2 (leave-one-out included) is rejected before any fitting.
    """
    if folds.sizes().min() < 2:
        raise InvalidFoldCountError(folds.k, data.n, "every test fold needs at least 2 rows")

    def one_fold(split) -> MetricReport:
        train_idx, test_idx = split
        model = trainer(data.take(train_idx))
        held_out = data.take(test_idx)
        return compute_metrics(model.predict(held_out.rows), held_out.target,
                               mape_epsilon=mape_epsilon)

    reports = tuple(run_ordered(one_fold, folds.folds(), workers))
    summary = summarize_folds(reports)
    log.debug("CV %s: median r2 %.4f", name or "model", summary.stat("r2", "Median"))
    return CvResult(name=name, reports=reports, summary=summary)


def compare_models(roster: Mapping[str, RegressorSpec], data: Dataset, k: int, seed: int,
                   workers: int = 1, mape_epsilon: Optional[float] = None) -> dict:
    """Cross-validate every roster entry on one shared fold assignment.

    Sharing folds pairs the per-fold scores across models for ranking.
    """
    folds = kfold_split(data, k, seed)

    def one_model(item):
        name, spec = item
        log.info("Cross-validating %s (%s, %d folds)", name, spec.family, k)
        return cross_validate(spec_trainer(spec), data, folds, workers=1, name=name,
                              mape_epsilon=mape_epsilon)

    results = run_ordered(one_model, roster.items(), workers)
    return {r.name: r for r in results}
