import logging
import zlib
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from ..errors import ConfigError
from ..evaluation import run_ordered
from .base import Bounds, Objective, OptimizerConfig, RunTrace
from .de import de_optimize
from .ga import ga_optimize
from .pso import pso_optimize
from .sampling import latin_hypercube_sample, uniform_sample

log = logging.getLogger(__name__)

OPTIMIZERS = {"de": de_optimize, "ga": ga_optimize, "pso": pso_optimize}
SAMPLERS = {"uniform": uniform_sample, "lhs": latin_hypercube_sample}


@dataclass(frozen=True)
class MethodSpec:
    """One campaign entry: an optimiser (`optimizer` set) or a sampler of `n_samples` points."""

    name: str
    kind: str
    optimizer: Optional[OptimizerConfig] = None
    n_samples: int = 1250
    batch: int = 25

    def __post_init__(self):
        if self.kind in OPTIMIZERS:
            config = self.optimizer or OptimizerConfig(self.kind)
            if config.algorithm != self.kind:
                raise ConfigError(f"methods.{self.name}", "optimizer algorithm does not match kind")
            object.__setattr__(self, "optimizer", config.validate())
        elif self.kind not in SAMPLERS:
            raise ConfigError(f"methods.{self.name}",
                              f"unknown kind '{self.kind}' (expected one of "
                              f"{', '.join([*OPTIMIZERS, *SAMPLERS])})")

    @property
    def candidate_count(self) -> int:
        return self.optimizer.population if self.optimizer else self.batch


def run_seed(master_seed: int, method_name: str, run: int) -> int:
    """Independent stream per (master seed, method, run)."""
    seq = np.random.SeedSequence([master_seed, zlib.crc32(method_name.encode()), run])
    return int(seq.generate_state(1)[0])


def execute(method: MethodSpec, objective: Objective, bounds: Bounds, seed: int) -> RunTrace:
    if method.kind in OPTIMIZERS:
        return OPTIMIZERS[method.kind](objective, bounds, replace(method.optimizer, seed=seed))
    return SAMPLERS[method.kind](objective, bounds, method.n_samples, seed, batch=method.batch)


def five_number(values: np.ndarray) -> dict:
    q = np.percentile(values, [0, 25, 50, 75, 100])
    return {"min": float(q[0]), "q1": float(q[1]), "median": float(q[2]), "q3": float(q[3]),
            "max": float(q[4])}


@dataclass(frozen=True)
class MethodResult:
    method: MethodSpec
    traces: tuple

    @property
    def name(self) -> str:
        return self.method.name

    @property
    def final_bests(self) -> np.ndarray:
        return np.array([t.final_best for t in self.traces])

    def best_run(self) -> RunTrace:
        return self.traces[int(np.argmax(self.final_bests))]

    def summary(self) -> dict:
        stats = five_number(self.final_bests)
        stats["mean"] = float(self.final_bests.mean())
        stats["evaluations"] = int(self.traces[0].evaluations)
        return stats

    def curve_matrix(self) -> np.ndarray:
        """runs x steps best-so-far matrix."""
        return np.vstack([t.best_so_far for t in self.traces])

    def trace_frame(self) -> pd.DataFrame:
        rows = []
        for run, trace in enumerate(self.traces):
            for gen, value in enumerate(trace.best_so_far):
                rows.append({"run": run, "generation": gen, "best_so_far": float(value)})
        return pd.DataFrame(rows, columns=["run", "generation", "best_so_far"])

    def envelope_frame(self) -> pd.DataFrame:
        curves = self.curve_matrix()
        return pd.DataFrame({
            "generation": np.arange(curves.shape[1]),
            "min": curves.min(axis=0),
            "mean": curves.mean(axis=0),
            "max": curves.max(axis=0),
        })


@dataclass(frozen=True)
class CampaignResult:
    results: tuple
    best_method: str
    candidates: tuple
    feature_names: tuple

    def result(self, name: str) -> MethodResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def summary_frame(self) -> pd.DataFrame:
        rows = [{"method": r.name, **r.summary()} for r in self.results]
        return pd.DataFrame(rows, columns=["method", "min", "q1", "median", "q3", "max", "mean",
                                           "evaluations"])

    def summary_text(self) -> str:
        lines = ["Optimisation campaign (final best over runs)",
                 f"{'method':<10}{'min':>12}{'q1':>12}{'median':>12}{'q3':>12}{'max':>12}"
                 f"{'evals':>8}"]
        for _, row in self.summary_frame().iterrows():
            lines.append(f"{row['method']:<10}{row['min']:>12.3f}{row['q1']:>12.3f}"
                         f"{row['median']:>12.3f}{row['q3']:>12.3f}{row['max']:>12.3f}"
                         f"{int(row['evaluations']):>8}")
        lines.append(f"best method by median: {self.best_method}")
        return "\n".join(lines)

    def candidates_frame(self, target_name: str = "predicted") -> pd.DataFrame:
        frame = pd.DataFrame([c.x for c in self.candidates], columns=list(self.feature_names))
        frame[target_name] = [c.fitness for c in self.candidates]
        return frame


def run_campaign(objective: Objective, bounds: Bounds, methods: Sequence[MethodSpec], runs: int,
                 seed: int, workers: int = 1,
                 feature_names: Optional[Sequence[str]] = None) -> CampaignResult:
    """Run every method `runs` times on independent seeds.

    The best method is the one with the highest median final best (first in
    `methods` on ties); its best run's final population becomes the candidate
    set (the top `batch` samples for a sampler).
    """
    if not methods:
        raise ConfigError("campaign.methods", "at least one method is required")
    if runs < 1:
        raise ConfigError("campaign.runs", "must be >= 1")
    names = [m.name for m in methods]
    if len(set(names)) != len(names):
        raise ConfigError("campaign.methods", "method names must be unique")

    jobs = [(m, run) for m in methods for run in range(runs)]

    def one(job):
        method, run = job
        return execute(method, objective, bounds, run_seed(seed, method.name, run))

    traces = run_ordered(one, jobs, workers)
    results = []
    for i, method in enumerate(methods):
        result = MethodResult(method, tuple(traces[i * runs:(i + 1) * runs]))
        summary = result.summary()
        log.info("Campaign %s: median final best %.4f over %d runs (%d evaluations each)",
                 method.name, summary["median"], runs, summary["evaluations"])
        results.append(result)

    medians = np.array([np.median(r.final_bests) for r in results])
    best = results[int(np.argmax(medians))]
    candidates = tuple(best.best_run().final_population()[:best.method.candidate_count])
    if feature_names is None:
        feature_names = tuple(f"x{j}" for j in range(bounds.d))
    return CampaignResult(results=tuple(results), best_method=best.name, candidates=candidates,
                          feature_names=tuple(feature_names))
