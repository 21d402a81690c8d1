"""Constrained linear best-arm identification: find the best arm under an unknown linear constraint."""
from .core import (
    AlgorithmView,
    Allocation,
    CbaiInstance,
    InstanceError,
    constraint_margins,
    min_margin,
    superlevel_arms,
    true_optimum,
    validate_instance,
)
from .oracle import Oracle, OracleRng, observe_binary, observe_gaussian

__version__ = "0.1.0"

__all__ = [
    "AlgorithmView",
    "Allocation",
    "CbaiInstance",
    "InstanceError",
    "constraint_margins",
    "min_margin",
    "superlevel_arms",
    "true_optimum",
    "validate_instance",
    "Oracle",
    "OracleRng",
    "observe_binary",
    "observe_gaussian",
]
