from .base import (
    Bounds,
    DeSettings,
    Evaluator,
    GaSettings,
    Individual,
    OptimizerConfig,
    PsoSettings,
    RunTrace,
    initialize_population,
)
from .campaign import CampaignResult, MethodResult, MethodSpec, run_campaign, run_seed
from .de import binomial_crossover, de_mutation, de_optimize
from .ga import ga_optimize, gaussian_mutation, tournament_select, two_point_crossover
from .pso import pso_optimize, pso_step
from .sampling import latin_hypercube_sample, uniform_sample


def surrogate_objective(model):
    """Fitness function backed by a fitted model's batch prediction."""
    return model.predict


__all__ = [
    "Bounds",
    "CampaignResult",
    "DeSettings",
    "Evaluator",
    "GaSettings",
    "Individual",
    "MethodResult",
    "MethodSpec",
    "OptimizerConfig",
    "PsoSettings",
    "RunTrace",
    "binomial_crossover",
    "de_mutation",
    "de_optimize",
    "ga_optimize",
    "gaussian_mutation",
    "initialize_population",
    "latin_hypercube_sample",
    "pso_optimize",
    "pso_step",
    "run_campaign",
    "run_seed",
    "surrogate_objective",
    "tournament_select",
    "two_point_crossover",
    "uniform_sample",
]
