"""Elimination algorithms for constrained best-arm identification."""
from .elimination import (CERTIFIED, EXHAUSTED, EliminationState, RunResult, TraceRow,
                          initial_state, recommend_anytime, update_elimination)
from .greedy import BOUNDS_MODES, SELECT_RULES, run_greedy
from .round_based import (FLAVORS, acol_round_length, fixed_allocation,
                          geometric_round_length, run_acol, run_round_based)

__all__ = [
    "CERTIFIED",
    "EXHAUSTED",
    "EliminationState",
    "RunResult",
    "TraceRow",
    "initial_state",
    "recommend_anytime",
    "update_elimination",
    "run_acol",
    "run_round_based",
    "run_greedy",
    "acol_round_length",
    "geometric_round_length",
    "fixed_allocation",
    "FLAVORS",
    "SELECT_RULES",
    "BOUNDS_MODES",
]
