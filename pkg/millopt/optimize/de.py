import logging
from typing import Optional

import numpy as np

from .base import (
    BestTracker,
    Bounds,
    Evaluator,
    Objective,
    OptimizerConfig,
    RunTrace,
    TraceSink,
    emit,
    finish_run,
    initial_positions,
)

log = logging.getLogger(__name__)


def de_mutation(base: np.ndarray, r1: np.ndarray, r2: np.ndarray, F: float) -> np.ndarray:
    """V = base + F (r1 - r2)"""
    return base + F * (r1 - r2)


def binomial_crossover(target: np.ndarray, mutant: np.ndarray, CR: float,
                       rng: np.random.Generator) -> np.ndarray:
    """Take each coordinate from the mutant with probability CR; coordinate j_rand always."""
    d = target.shape[0]
    j_rand = rng.integers(d)
    mask = rng.random(d) < CR
    mask[j_rand] = True
    return np.where(mask, mutant, target)


def de_optimize(objective: Objective, bounds: Bounds, config: OptimizerConfig,
                trace_sink: Optional[TraceSink] = None) -> RunTrace:
    """Synchronous DE: a full generation of trials is built, evaluated, then selected.

    The trial replaces its target when its fitness is >= the target's.
    """
    config = config.validate()
    settings = config.de
    rng = np.random.default_rng(config.seed)
    evaluate = Evaluator(objective, bounds)
    P = config.population

    X = initial_positions(bounds, P, rng)
    fitness = evaluate(X)
    tracker = BestTracker()
    tracker.update(X, fitness)
    emit(trace_sink, 0, X, fitness)

    for gen in range(1, config.generations + 1):
        trials = np.empty_like(X)
        for i in range(P):
            others = np.delete(np.arange(P), i)
            r1, r2, r3 = rng.choice(others, size=3, replace=False)
            base = X[i] if settings.strategy == "target/1" else X[r3]
            mutant = de_mutation(base, X[r1], X[r2], settings.F)
            trials[i] = binomial_crossover(X[i], mutant, settings.CR, rng)
        trials = bounds.repair(trials, config.boundary)
        trial_fitness = evaluate(trials)
        accept = trial_fitness >= fitness
        X = np.where(accept[:, None], trials, X)
        fitness = np.where(accept, trial_fitness, fitness)
        tracker.update(X, fitness)
        emit(trace_sink, gen, X, fitness)
        log.debug("DE generation %d: best %.6g, accepted %d", gen, tracker.fitness,
                  int(accept.sum()))

    return finish_run("de", config.seed, tracker, evaluate, X, fitness)
