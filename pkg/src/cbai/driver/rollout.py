"""Deterministic rollouts and feature counts."""
from __future__ import annotations

import numpy as np

from .dynamics import HORIZON, Policy, step_batch
from .features import CONSTRAINT_WEIGHTS, N_FEATURES, features_batch
from .scenarios import Scenario

__all__ = ["rollout", "rollout_batch", "returns_and_costs"]


def rollout_batch(actions: np.ndarray, scenario: Scenario, keep_states: bool = False):
    """Feature counts of a batch of open-loop policies.

    Parameters
    ----------
    actions : ndarray, shape (B, HORIZON, 2) or (B, 2 * HORIZON)
    scenario : Scenario
    keep_states : bool
        Also return the visited states.

    Returns
    -------
    counts : ndarray, shape (B, 9)
        Features summed over the states reached after each of the actions.
    states : ndarray, shape (B, HORIZON + 1, 4)
        Only when ``keep_states``; entry 0 is the initial state.
    """
    acts = np.asarray(actions, dtype=np.float64).reshape(-1, HORIZON, 2)
    B = acts.shape[0]
    s = np.tile(scenario.initial_state.as_array(), (B, 1))
    others = scenario.other_car_trajectories
    counts = np.zeros((B, N_FEATURES))
    traj = np.empty((B, HORIZON + 1, 4)) if keep_states else None
    if keep_states:
        traj[:, 0] = s
    for t in range(HORIZON):
        s = step_batch(s, acts[:, t])
        counts += features_batch(s, others[:, t + 1])
        if keep_states:
            traj[:, t + 1] = s
    if keep_states:
        return counts, traj
    return counts


def rollout(policy: Policy, scenario: Scenario):
    """Feature counts and state trajectory of one policy."""
    counts, traj = rollout_batch(policy.actions[None], scenario, keep_states=True)
    return counts[0], traj[0]


def returns_and_costs(counts: np.ndarray, scenario: Scenario):
    """Return ``G = counts @ theta`` and constraint value ``J = counts @ phi``."""
    counts = np.asarray(counts, dtype=np.float64)
    return counts @ scenario.reward_weights, counts @ CONSTRAINT_WEIGHTS
