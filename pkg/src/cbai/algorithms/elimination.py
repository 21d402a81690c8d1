"""Shared elimination-set bookkeeping and run results."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..core import AlgorithmView
from ..estimation import ConfidenceBounds

__all__ = [
    "EliminationState",
    "TraceRow",
    "RunResult",
    "initial_state",
    "update_elimination",
    "eliminate_masks",
    "recommend_anytime",
    "CERTIFIED",
    "EXHAUSTED",
]

CERTIFIED = "certified"
EXHAUSTED = "exhausted-budget"


@dataclass(frozen=True)
class EliminationState:
    """Uncertain set, certified-feasible set and the feasible reward floor.

    Attributes
    ----------
    uncertain : frozenset of int
    feasible : frozenset of int
    reward_floor : float
        Best reward among certified-feasible arms, ``-inf`` while none is certified.
    round : int
    queries_used : int
    """

    uncertain: frozenset
    feasible: frozenset
    reward_floor: float = -np.inf
    round: int = 0
    queries_used: int = 0

    @property
    def done(self) -> bool:
        return not self.uncertain


def initial_state(n_arms: int) -> EliminationState:
    return EliminationState(frozenset(range(n_arms)), frozenset())


def update_elimination(state: EliminationState, bounds: ConfidenceBounds,
                       view: AlgorithmView) -> EliminationState:
    """Apply one elimination step.

    Arms whose upper bound is at most the threshold join the feasible set.
    The uncertain set then loses arms certified infeasible (lower bound above
    the threshold), arms certified feasible, and arms whose reward is below the
    best certified-feasible reward.
    """
    n = view.n_arms
    unc = np.zeros(n, dtype=bool)
    unc[list(state.uncertain)] = True
    feas = np.zeros(n, dtype=bool)
    feas[list(state.feasible)] = True
    unc, feas, floor = eliminate_masks(unc, feas, bounds.lower, bounds.upper,
                                       view.rewards(), view.threshold)
    return replace(state, uncertain=frozenset(np.flatnonzero(unc).tolist()),
                   feasible=frozenset(np.flatnonzero(feas).tolist()), reward_floor=floor)


def eliminate_masks(uncertain, feasible, lower, upper, rewards, threshold, floor=None):
    """Boolean-mask form of :func:`update_elimination`.

    ``floor`` may pass the current reward floor to skip recomputing it when no
    arm is newly certified.  Returns new ``(uncertain, feasible, reward_floor)``
    without modifying the inputs.
    """
    certified = upper <= threshold
    if (certified & ~feasible).any():
        feasible = feasible | certified
        floor = float(rewards[feasible].max())
    elif floor is None:
        floor = float(rewards[feasible].max()) if feasible.any() else -np.inf
    uncertain = uncertain & ~((lower > threshold) | certified | (rewards < floor))
    return uncertain, feasible, floor


def recommend_anytime(state: EliminationState, view: AlgorithmView) -> int | None:
    """Best certified-feasible arm by reward, lowest index on ties; ``None`` if none."""
    if not state.feasible:
        return None
    rewards = view.rewards()
    idx = sorted(state.feasible)
    return int(idx[int(np.argmax(rewards[idx]))])


@dataclass(frozen=True)
class TraceRow:
    """Snapshot after one round (or one logged step) of an algorithm.

    ``max_width`` is the largest bound width over the arms that were uncertain
    when the round started.
    """

    round: int
    queries_cumulative: int
    n_uncertain: int
    n_feasible: int
    max_width: float
    recommended_so_far: int | None
    round_length: int = 0


@dataclass
class RunResult:
    """Outcome of one algorithm run.

    ``correct`` stays ``None`` until compared with the ground truth.
    """

    recommended: int | None
    queries: int
    trace: list = field(default_factory=list)
    stopped_reason: str = CERTIFIED
    final_state: EliminationState | None = None
    correct: bool | None = None
