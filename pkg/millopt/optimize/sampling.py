import logging
from typing import Optional

import numpy as np

from ..errors import ConfigError
from .base import BestTracker, Bounds, Evaluator, Objective, RunTrace, finish_run

log = logging.getLogger(__name__)


def latin_hypercube_unit(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """n points in [0, 1)^d; per dimension each of the n strata holds exactly one point."""
    u = np.empty((n, d))
    for j in range(d):
        u[:, j] = (rng.permutation(n) + rng.random(n)) / n
    return u


def _run_sampler(method: str, unit: np.ndarray, objective: Objective, bounds: Bounds, seed: int,
                 batch: Optional[int]) -> RunTrace:
    n = unit.shape[0]
    X = bounds.clip(bounds.lower + unit * bounds.span)
    evaluate = Evaluator(objective, bounds)
    batch = n if batch is None else batch
    tracker = BestTracker()
    fitness = np.empty(n)
    for start in range(0, n, batch):
        stop = min(start + batch, n)
        fitness[start:stop] = evaluate(X[start:stop])
        tracker.update(X[start:stop], fitness[start:stop])
    log.debug("%s sampler: best %.6g over %d samples", method, tracker.fitness, n)
    return finish_run(method, seed, tracker, evaluate, X, fitness)


def _check(n: int, batch: Optional[int]) -> None:
    if n < 1:
        raise ConfigError("n_samples", "must be >= 1")
    if batch is not None and batch < 1:
        raise ConfigError("batch", "must be >= 1")


def uniform_sample(objective: Objective, bounds: Bounds, n: int, seed: int,
                   batch: Optional[int] = None) -> RunTrace:
    """n box-uniform points; the trace holds the running best after every `batch` samples."""
    _check(n, batch)
    rng = np.random.default_rng(seed)
    return _run_sampler("uniform", rng.random((n, bounds.d)), objective, bounds, seed, batch)


def latin_hypercube_sample(objective: Objective, bounds: Bounds, n: int, seed: int,
                           batch: Optional[int] = None) -> RunTrace:
    _check(n, batch)
    rng = np.random.default_rng(seed)
    unit = latin_hypercube_unit(n, bounds.d, rng)
    return _run_sampler("lhs", unit, objective, bounds, seed, batch)
