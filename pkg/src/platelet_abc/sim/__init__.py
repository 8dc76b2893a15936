from .model import PARAM_NAMES, PARAM_UNITS, ConfigError, ModelParams, SimConfig
from .simulator import (
    OBSERVABLES,
    DepositionSimulator,
    DepositionTrace,
    SimState,
    advance,
    advance_one_step,
    attempt_depositions,
    cluster_sizes,
    init_simulation,
    label_clusters,
    measure,
    simulate,
)

__all__ = [
    "PARAM_NAMES", "PARAM_UNITS", "ConfigError", "ModelParams", "SimConfig",
    "OBSERVABLES", "DepositionSimulator", "DepositionTrace", "SimState", "advance",
    "advance_one_step", "attempt_depositions", "cluster_sizes", "init_simulation",
    "label_clusters", "measure", "simulate",
]
