"""Likelihood-free posterior sampling."""

from .engine import (
    ACCEPT_LANE,
    SIM_LANE,
    AbcBudgetExhausted,
    AbcSimulationError,
    DistanceEnergy,
    candidate_seeds,
    evaluate_candidates,
    exponential_kernel,
    indicator_kernel,
    propose,
    rejection_abc,
    run_simulations,
    sabc,
    summary_distance,
)
from .prior import Prior, sample_prior
from .samples import AbcConfig, PosteriorSamples

__all__ = [
    "ACCEPT_LANE", "SIM_LANE", "AbcBudgetExhausted", "AbcConfig", "AbcSimulationError", "DistanceEnergy",
    "PosteriorSamples",
    "Prior", "candidate_seeds", "evaluate_candidates", "exponential_kernel", "indicator_kernel", "propose",
    "rejection_abc", "run_simulations", "sabc", "sample_prior", "summary_distance",
]
