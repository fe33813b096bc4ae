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


def pso_step(x, v, p_best, g_best, w, c1, c2, r1, r2, v_min, v_max):
    """v' = clip(w v + c1 r1 (P - x) + c2 r2 (G - x), v_min, v_max); x' = x + v'.

    Returns (x', v'); keeping x' inside the box is the caller's job.
    """
    v_new = w * v + c1 * r1 * (p_best - x) + c2 * r2 * (g_best - x)
    v_new = np.clip(v_new, v_min, v_max)
    return x + v_new, v_new


def pso_optimize(objective: Objective, bounds: Bounds, config: OptimizerConfig,
                 trace_sink: Optional[TraceSink] = None) -> RunTrace:
    config = config.validate()
    settings = config.pso
    rng = np.random.default_rng(config.seed)
    evaluate = Evaluator(objective, bounds)
    P, d = config.population, bounds.d
    if settings.velocity_scale == "range":
        v_min, v_max = settings.v_min * bounds.span, settings.v_max * bounds.span
    else:
        v_min = np.full(d, settings.v_min)
        v_max = np.full(d, settings.v_max)

    X = initial_positions(bounds, P, rng)
    V = np.zeros((P, d))
    fitness = evaluate(X)
    p_best, p_fit = X.copy(), fitness.copy()
    tracker = BestTracker()
    tracker.update(X, fitness)
    emit(trace_sink, 0, X, fitness)

    for gen in range(1, config.generations + 1):
        r1 = rng.random((P, d))
        r2 = rng.random((P, d))
        X, V = pso_step(X, V, p_best, tracker.x, settings.w, settings.c1, settings.c2,
                        r1, r2, v_min, v_max)
        X = bounds.repair(X, config.boundary)
        fitness = evaluate(X)
        improved = fitness > p_fit
        p_best[improved] = X[improved]
        p_fit[improved] = fitness[improved]
        tracker.update(X, fitness)
        emit(trace_sink, gen, X, fitness)
        log.debug("PSO generation %d: global best %.6g", gen, tracker.fitness)

    return finish_run("pso", config.seed, tracker, evaluate, X, fitness)
