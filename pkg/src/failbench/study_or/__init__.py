"""Odds-ratio estimation study: 2x2 simulation, five estimators, fallbacks."""

from .estimators import (
    BASE_ESTIMATORS,
    ContingencyTable2x2,
    OrEstimator,
    OrMethod,
    estimate_or,
    haldane_correct,
    has_sampling_zero,
    or_evaluator,
)
from .study import (
    DEFAULT_P0,
    DEFAULT_REPS,
    QUICK_REPS,
    DEFAULT_FALLBACKS,
    OrScenario,
    OrStudyConfig,
    OrStudyResult,
    ScenarioResult,
    exact_zero_probability,
    default_scenarios,
    run_or_study,
    simulate_2x2,
    simulate_tables,
)

__all__ = [
    "BASE_ESTIMATORS", "ContingencyTable2x2", "OrEstimator", "OrMethod", "estimate_or",
    "haldane_correct", "has_sampling_zero", "or_evaluator", "DEFAULT_P0", "DEFAULT_REPS", "QUICK_REPS", "DEFAULT_FALLBACKS",
    "OrScenario", "OrStudyConfig", "OrStudyResult", "ScenarioResult",
    "exact_zero_probability", "default_scenarios", "run_or_study", "simulate_2x2",
    "simulate_tables",
]
