import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import ConfigError, DimensionError, FeasibilityError

log = logging.getLogger(__name__)

ALGORITHMS = ("de", "ga", "pso")
BOUNDARY_MODES = ("clip", "reflect")
DE_STRATEGIES = ("rand/1", "target/1")

# objective(rows) -> fitness per row, maximised
Objective = Callable[[np.ndarray], np.ndarray]
# trace_sink(generation, positions, fitness) after every generation (0 = initial population)
TraceSink = Callable[[int, np.ndarray, np.ndarray], None]


@dataclass(frozen=True)
class Bounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.array(self.lower, dtype=float).reshape(-1)
        upper = np.array(self.upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape:
            raise DimensionError(lower.shape[0], upper.shape[0], "upper bounds")
        if np.any(lower > upper):
            bad = int(np.flatnonzero(lower > upper)[0])
            raise ConfigError(f"bounds[{bad}]", f"lower {lower[bad]} exceeds upper {upper[bad]}")
        lower.flags.writeable = False
        upper.flags.writeable = False
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def from_features(cls, specs: Sequence) -> "Bounds":
        return cls([s.lower for s in specs], [s.upper for s in specs])

    @property
    def d(self) -> int:
        return int(self.lower.shape[0])

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.all((X >= self.lower) & (X <= self.upper), axis=1)

    def clip(self, X: np.ndarray) -> np.ndarray:
        return np.clip(X, self.lower, self.upper)

    def reflect(self, X: np.ndarray) -> np.ndarray:
        """Mirror excursions back into the box (folding repeatedly for large steps)."""
        span = self.span
        safe = np.where(span > 0, span, 1.0)
        offset = np.mod(X - self.lower, 2.0 * safe)
        folded = np.where(offset > safe, 2.0 * safe - offset, offset)
        return np.where(span > 0, self.lower + folded, self.lower)

    def repair(self, X: np.ndarray, mode: str = "clip") -> np.ndarray:
        out = self.reflect(X) if mode == "reflect" else self.clip(X)
        # guard against rounding in the fold arithmetic
        return self.clip(out)


@dataclass(frozen=True)
class Individual:
    x: np.ndarray
    fitness: float = float("nan")


@dataclass(frozen=True)
class DeSettings:
    F: float = 0.5
    CR: float = 0.7
    strategy: str = "rand/1"


@dataclass(frozen=True)
class GaSettings:
    crossover_rate: float = 0.7
    mutation_rate: float = 0.2
    sigma: float = 0.1
    tournament_size: int = 3
    elitism: int = 1


@dataclass(frozen=True)
class PsoSettings:
    w: float = 0.729
    c1: float = 2.0
    c2: float = 2.0
    v_min: float = -1.0
    v_max: float = 1.0
    velocity_scale: str = "range"


@dataclass(frozen=True)
class OptimizerConfig:
    """Algorithm hyperparameters; `sigma` and PSO velocity limits are fractions of each range."""

    algorithm: str
    population: int = 25
    generations: int = 50
    seed: int = 0
    boundary: str = "clip"
    de: DeSettings = field(default_factory=DeSettings)
    ga: GaSettings = field(default_factory=GaSettings)
    pso: PsoSettings = field(default_factory=PsoSettings)

    def validate(self) -> "OptimizerConfig":
        def fail(key, message):
            raise ConfigError(key, message)

        if self.algorithm not in ALGORITHMS:
            fail("algorithm", f"must be one of {', '.join(ALGORITHMS)}")
        if self.generations < 0:
            fail("generations", "must be >= 0")
        if self.boundary not in BOUNDARY_MODES:
            fail("boundary", f"must be one of {', '.join(BOUNDARY_MODES)}")
        minimum = {"de": 4, "ga": 2, "pso": 1}[self.algorithm]
        if self.population < minimum:
            fail("population", f"{self.algorithm} needs a population of at least {minimum}")
        if self.algorithm == "de":
            if self.de.F <= 0:
                fail("de.F", "must be > 0")
            if not 0 <= self.de.CR <= 1:
                fail("de.CR", "must lie in [0, 1]")
            if self.de.strategy not in DE_STRATEGIES:
                fail("de.strategy", f"must be one of {', '.join(DE_STRATEGIES)}")
        elif self.algorithm == "ga":
            ga = self.ga
            if not 0 <= ga.crossover_rate <= 1:
                fail("ga.crossover_rate", "must lie in [0, 1]")
            if not 0 <= ga.mutation_rate <= 1:
                fail("ga.mutation_rate", "must lie in [0, 1]")
            if ga.sigma < 0:
                fail("ga.sigma", "must be >= 0")
            if ga.tournament_size < 1:
                fail("ga.tournament_size", "must be >= 1")
            if not 0 <= ga.elitism < self.population:
                fail("ga.elitism", "must lie in [0, population)")
        else:
            pso = self.pso
            if pso.v_min > pso.v_max:
                fail("pso.v_min", "must not exceed v_max")
            if pso.velocity_scale not in ("range", "absolute"):
                fail("pso.velocity_scale", "must be 'range' or 'absolute'")
        return self


class Evaluator:
    """Counts evaluations and audits that every evaluated point is feasible."""

    def __init__(self, objective: Objective, bounds: Bounds):
        self.objective = objective
        self.bounds = bounds
        self.evaluations = 0

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        if not np.all(self.bounds.contains(X)):
            raise FeasibilityError(f"{int(np.count_nonzero(~self.bounds.contains(X)))} "
                                   "candidate(s) outside the bounds were sent for evaluation")
        fitness = np.asarray(self.objective(X), dtype=float).reshape(-1)
        if fitness.shape[0] != X.shape[0]:
            raise DimensionError(X.shape[0], fitness.shape[0], "objective output")
        if not np.all(np.isfinite(fitness)):
            raise FeasibilityError("objective returned non-finite fitness")
        self.evaluations += X.shape[0]
        return fitness


@dataclass(frozen=True)
class RunTrace:
    """One optimiser run: best-so-far per generation (column 0 = initial population)."""

    method: str
    seed: int
    best_so_far: np.ndarray
    best: Individual
    evaluations: int
    final_positions: np.ndarray
    final_fitness: np.ndarray

    @property
    def final_best(self) -> float:
        return float(self.best_so_far[-1])

    def final_population(self) -> list:
        order = np.argsort(-self.final_fitness, kind="stable")
        return [Individual(self.final_positions[i].copy(), float(self.final_fitness[i]))
                for i in order]


class BestTracker:
    def __init__(self):
        self.x = None
        self.fitness = -np.inf
        self.history = []

    def update(self, X: np.ndarray, fitness: np.ndarray) -> None:
        i = int(np.argmax(fitness))
        if fitness[i] > self.fitness:
            self.fitness = float(fitness[i])
            self.x = np.array(X[i], copy=True)
        self.history.append(self.fitness)

    def individual(self) -> Individual:
        return Individual(self.x, self.fitness)


def initial_positions(bounds: Bounds, population: int, rng: np.random.Generator) -> np.ndarray:
    u = rng.random((population, bounds.d))
    return bounds.lower + u * bounds.span


def initialize_population(bounds: Bounds, population: int, seed: int) -> list:
    """x = lower + u (upper - lower), u ~ U(0, 1) per coordinate; fitness left unset."""
    if population < 1:
        raise ConfigError("population", "must be >= 1")
    X = initial_positions(bounds, population, np.random.default_rng(seed))
    return [Individual(x) for x in X]


def finish_run(method: str, seed: int, tracker: BestTracker, evaluator: Evaluator,
               X: np.ndarray, fitness: np.ndarray) -> RunTrace:
    return RunTrace(
        method=method,
        seed=seed,
        best_so_far=np.asarray(tracker.history),
        best=tracker.individual(),
        evaluations=evaluator.evaluations,
        final_positions=np.array(X, copy=True),
        final_fitness=np.array(fitness, copy=True),
    )


def emit(trace_sink: Optional[TraceSink], generation: int, X: np.ndarray,
         fitness: np.ndarray) -> None:
    if trace_sink is not None:
        trace_sink(generation, X.copy(), fitness.copy())
