"""Cross-entropy policy search with an optional feasibility-first elite rule."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .dynamics import HORIZON, Policy
from .features import THRESHOLD
from .rollout import returns_and_costs, rollout_batch
from .scenarios import Scenario

__all__ = ["OBJECTIVES", "CemResult", "select_elites", "cem_search", "cem_optimize"]

OBJECTIVES = ("reward-only", "constrained", "penalized")
N_PARAMS = 2 * HORIZON


class CemResult(NamedTuple):
    """Outcome of one search.

    ``best_feasible_reward`` is the largest return among all sampled
    policies with ``J <= target`` (``-inf`` when none was feasible).
    """

    policy: Policy
    reward: float
    cost: float
    best_feasible_reward: float
    mean: np.ndarray
    std: np.ndarray


def select_elites(G: np.ndarray, J: np.ndarray, n_elite: int, objective: str,
                  target: float = THRESHOLD, penalty: float = 0.0) -> np.ndarray:
    """Indices of the elite samples.

    The constrained rule takes the ``n_elite`` samples with the lowest
    constraint value, unless even the last of those satisfies ``J <= target``,
    in which case the feasible samples are ranked by return instead.
    Ties keep sample order.
    """
    if objective == "reward-only":
        return np.argsort(-G, kind="stable")[:n_elite]
    if objective == "penalized":
        return np.argsort(-(G - penalty * J), kind="stable")[:n_elite]
    if objective != "constrained":
        raise ValueError(f"unknown objective {objective!r}; expected one of {OBJECTIVES}")
    order = np.argsort(J, kind="stable")
    elite = order[:n_elite]
    if J[elite[-1]] - target <= 0:
        feas = np.flatnonzero(J - target <= 0)
        elite = feas[np.argsort(-G[feas], kind="stable")][:n_elite]
    return elite


def cem_search(scenario: Scenario, objective: str = "constrained", n_iter: int = 50,
               n_samp: int = 100, n_elite: int = 10, rng=None, penalty: float = 0.0,
               target: float = THRESHOLD, init_mean=None, init_std=None,
               smoothing: float = 0.7, min_std: float = 0.01) -> CemResult:
    """Fit a diagonal Gaussian over action sequences to elite samples.

    Parameters
    ----------
    scenario : Scenario
    objective : {"reward-only", "constrained", "penalized"}
        Penalized ranks by ``G - penalty * J``.
    n_iter, n_samp, n_elite : int
    rng : numpy Generator or seed
    penalty : float
        Only used by the penalized objective.
    target : float
        Constraint level treated as feasible by the constrained rule.
    init_mean, init_std : array_like, optional
        Defaults are 0 and 1 per action coordinate.
    smoothing : float
        Weight of the new elite fit against the previous distribution; 1 is
        the plain refit.
    min_std : float
        Floor on each coordinate's standard deviation, keeps the search from
        collapsing early.

    Returns
    -------
    CemResult
        The final mean as a policy together with its return and constraint
        value.
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}; expected one of {OBJECTIVES}")
    if n_iter < 1:
        raise ValueError("n_iter must be at least 1")
    if not 1 <= n_elite <= n_samp:
        raise ValueError("need 1 <= n_elite <= n_samp")
    if objective == "penalized" and penalty < 0:
        raise ValueError("penalty must be nonnegative")
    if not 0 < smoothing <= 1:
        raise ValueError("smoothing must lie in (0, 1]")
    rng = np.random.default_rng(rng)
    mu = np.zeros(N_PARAMS) if init_mean is None else np.array(init_mean, dtype=np.float64).reshape(N_PARAMS)
    sd = np.ones(N_PARAMS) if init_std is None else np.array(init_std, dtype=np.float64).reshape(N_PARAMS)
    best_feasible = -np.inf
    for _ in range(n_iter):
        W = mu + sd * rng.standard_normal((n_samp, N_PARAMS))
        G, J = returns_and_costs(rollout_batch(W, scenario), scenario)
        ok = J <= target
        if ok.any():
            best_feasible = max(best_feasible, float(G[ok].max()))
        E = W[select_elites(G, J, n_elite, objective, target, penalty)]
        mu = smoothing * E.mean(axis=0) + (1 - smoothing) * mu
        sd = np.maximum(smoothing * E.std(axis=0) + (1 - smoothing) * sd, min_std)
    G, J = returns_and_costs(rollout_batch(mu[None], scenario), scenario)
    if J[0] <= target:
        best_feasible = max(best_feasible, float(G[0]))
    return CemResult(Policy.from_vector(mu), float(G[0]), float(J[0]), best_feasible, mu, sd)


def cem_optimize(scenario: Scenario, objective: str = "constrained", n_iter: int = 50,
                 n_samp: int = 100, n_elite: int = 10, rng=None, penalty: float = 0.0,
                 target: float = THRESHOLD, **kwargs) -> Policy:
    """Policy returned by :func:`cem_search`."""
    return cem_search(scenario, objective, n_iter, n_samp, n_elite, rng, penalty, target,
                      **kwargs).policy
