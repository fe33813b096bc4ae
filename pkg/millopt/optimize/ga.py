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


def tournament_select(fitness: np.ndarray, size: int, rng: np.random.Generator) -> int:
    """Index of the fittest of `size` uniformly drawn contestants."""
    contestants = rng.choice(fitness.shape[0], size=size, replace=size > fitness.shape[0])
    return int(contestants[int(np.argmax(fitness[contestants]))])


def two_point_crossover(a: np.ndarray, b: np.ndarray, p: int, q: int):
    """child1 = a[:p] + b[p:q] + a[q:], child2 the mirror image."""
    child1 = np.concatenate([a[:p], b[p:q], a[q:]])
    child2 = np.concatenate([b[:p], a[p:q], b[q:]])
    return child1, child2


def gaussian_mutation(x: np.ndarray, rate: float, sigma: np.ndarray,
                      rng: np.random.Generator) -> np.ndarray:
    mask = rng.random(x.shape[0]) < rate
    noise = rng.normal(0.0, 1.0, size=x.shape[0]) * sigma
    return np.where(mask, x + noise, x)


def ga_optimize(objective: Objective, bounds: Bounds, config: OptimizerConfig,
                trace_sink: Optional[TraceSink] = None) -> RunTrace:
    """Generational GA with tournament selection, two-point crossover and Gaussian mutation.

    The `elitism` best individuals are copied unchanged into the next
    generation; every generation's full population is evaluated.
    """
    config = config.validate()
    settings = config.ga
    rng = np.random.default_rng(config.seed)
    evaluate = Evaluator(objective, bounds)
    P, d = config.population, bounds.d
    sigma = settings.sigma * bounds.span

    X = initial_positions(bounds, P, rng)
    fitness = evaluate(X)
    tracker = BestTracker()
    tracker.update(X, fitness)
    emit(trace_sink, 0, X, fitness)

    for gen in range(1, config.generations + 1):
        elite = np.argsort(-fitness, kind="stable")[:settings.elitism]
        children = [X[i].copy() for i in elite]
        while len(children) < P:
            a = X[tournament_select(fitness, settings.tournament_size, rng)]
            b = X[tournament_select(fitness, settings.tournament_size, rng)]
            if rng.random() < settings.crossover_rate and d > 1:
                p, q = np.sort(rng.choice(d + 1, size=2, replace=False))
                c1, c2 = two_point_crossover(a, b, int(p), int(q))
            else:
                c1, c2 = a.copy(), b.copy()
            for child in (c1, c2):
                if len(children) < P:
                    children.append(gaussian_mutation(child, settings.mutation_rate, sigma, rng))
        X = bounds.repair(np.vstack(children), config.boundary)
        fitness = evaluate(X)
        tracker.update(X, fitness)
        emit(trace_sink, gen, X, fitness)
        log.debug("GA generation %d: best %.6g", gen, tracker.fitness)

    return finish_run("ga", config.seed, tracker, evaluate, X, fitness)
