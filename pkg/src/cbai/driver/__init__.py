"""Driving simulation used to build controller-selection instances."""
from .cem import OBJECTIVES, CemResult, cem_optimize, cem_search, select_elites
from .dynamics import FRICTION, HORIZON, CarState, Policy, step, step_batch
from .features import CONSTRAINT_WEIGHTS, N_FEATURES, THRESHOLD, features, features_batch
from .policy_set import (
    POLICY_SET_PENALTIES,
    SEARCH_SETTINGS,
    PolicySet,
    PolicySetError,
    SweepRow,
    build_policy_set,
    generate_policy_set,
    penalty_sweep,
)
from .rollout import returns_and_costs, rollout, rollout_batch
from .scenarios import SCENARIO_IDS, Scenario, constant_velocity_track, load_scenario, load_scenario_file

__all__ = [
    "OBJECTIVES", "CemResult", "cem_optimize", "cem_search", "select_elites",
    "FRICTION", "HORIZON", "CarState", "Policy", "step", "step_batch",
    "CONSTRAINT_WEIGHTS", "N_FEATURES", "THRESHOLD", "features", "features_batch",
    "POLICY_SET_PENALTIES", "SEARCH_SETTINGS", "PolicySet", "PolicySetError", "SweepRow",
    "build_policy_set", "generate_policy_set", "penalty_sweep",
    "returns_and_costs", "rollout", "rollout_batch",
    "SCENARIO_IDS", "Scenario", "constant_velocity_track", "load_scenario", "load_scenario_file",
]
