"""Precomputed controller sets exported as constrained best-arm instances."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..core import CbaiInstance
from .cem import cem_search
from .dynamics import Policy
from .features import CONSTRAINT_WEIGHTS, THRESHOLD
from .rollout import returns_and_costs, rollout_batch
from .scenarios import Scenario

__all__ = [
    "SEARCH_SETTINGS",
    "POLICY_SET_PENALTIES",
    "PolicySetError",
    "PolicySet",
    "build_policy_set",
    "generate_policy_set",
    "SweepRow",
    "penalty_sweep",
]

# CEM settings used for generating controllers
SEARCH_SETTINGS = dict(n_iter=200, n_samp=500, n_elite=50)
POLICY_SET_PENALTIES = (0.1, 1.0, 10.0)


class PolicySetError(RuntimeError):
    """The generated controllers cannot form a valid instance."""


class PolicySet(NamedTuple):
    """Generated controllers with their raw feature counts.

    ``origin`` labels how each policy was produced: ``"constrained"``,
    ``"penalized"``, ``"reward-only"`` or ``"perturbed"``.
    """

    instance: CbaiInstance
    policies: list
    counts: np.ndarray
    origin: np.ndarray
    scale: float


def _cem_batch(scenario, count, objective, rng, settings, penalties=(0.0,), target=THRESHOLD):
    means = []
    for i in range(count):
        res = cem_search(scenario, objective, rng=rng, penalty=penalties[i % len(penalties)],
                         target=target, **settings)
        means.append(res.mean)
    return means


def generate_policy_set(scenario: Scenario, k: int, rng=None, min_margin: float = 0.25,
                        perturbation: float = 0.1, settings: dict | None = None,
                        max_draws: int = 100_000) -> PolicySet:
    """Generate ``k`` controllers and export them with binary feedback.

    One fifth each come from constrained, penalized and reward-only
    searches, the rest are Gaussian perturbations of those solutions.
    Constrained searches aim at ``(1 - min_margin - 0.05) * tau`` and every
    kept policy has ``|J - tau| >= min_margin * tau``, so no controller sits
    almost exactly on the constraint boundary.

    Feature counts are divided by ``max |J|`` over the set, which maps every
    constraint value into ``[-1, 1]``; the threshold is rescaled alike.

    Raises
    ------
    ValueError
        ``k < 2`` or bad settings.
    PolicySetError
        No feasible policy, or not enough policies clear the margin.
    """
    if k < 2:
        raise ValueError("a policy set needs at least 2 policies")
    if not 0 <= min_margin < 1:
        raise ValueError("min_margin must lie in [0, 1)")
    rng = np.random.default_rng(rng)
    settings = dict(SEARCH_SETTINGS if settings is None else settings)
    tau = THRESHOLD
    n_each = max(1, k // 5)

    def margin_ok(J):
        return np.abs(J - tau) >= min_margin * tau

    sources = [
        ("constrained", _cem_batch(scenario, n_each, "constrained", rng, settings,
                                   target=(1.0 - min_margin - 0.05) * tau)),
        ("penalized", _cem_batch(scenario, n_each, "penalized", rng, settings, POLICY_SET_PENALTIES)),
        ("reward-only", _cem_batch(scenario, n_each, "reward-only", rng, settings)),
    ]
    vectors, origin = [], []
    for label, means in sources:
        W = np.array(means)
        _, J = returns_and_costs(rollout_batch(W, scenario), scenario)
        for w in W[margin_ok(J)]:
            vectors.append(w)
            origin.append(label)
    if not vectors:
        raise PolicySetError("no searched policy clears the constraint margin")
    centers = np.array(vectors)
    drawn = 0
    while len(vectors) < k:
        need = k - len(vectors)
        batch = max(2 * need, 16)
        drawn += batch
        if drawn > max_draws:
            raise PolicySetError(f"only {len(vectors)} of {k} policies clear the margin")
        W = centers[rng.integers(len(centers), size=batch)]
        W = W + perturbation * rng.standard_normal(W.shape)
        _, J = returns_and_costs(rollout_batch(W, scenario), scenario)
        for w in W[margin_ok(J)][:need]:
            vectors.append(w)
            origin.append("perturbed")
    W = np.array(vectors[:k])
    origin = np.array(origin[:k])
    counts = rollout_batch(W, scenario)
    _, J = returns_and_costs(counts, scenario)
    if not np.any(J <= tau):
        raise PolicySetError("every generated policy violates the constraint")
    scale = float(np.abs(J).max())
    inst = CbaiInstance(
        arms=counts / scale,
        reward=scenario.reward_weights,
        constraint=CONSTRAINT_WEIGHTS,
        threshold=tau / scale,
        noise_sigma=0.0,
        name=f"driver-{scenario.id}-k{k}",
        feedback="binary",
    )
    return PolicySet(inst, [Policy.from_vector(w) for w in W], counts, origin, scale)


def build_policy_set(scenario: Scenario, k: int, rng=None, **kwargs) -> CbaiInstance:
    """Instance from :func:`generate_policy_set`."""
    return generate_policy_set(scenario, k, rng, **kwargs).instance


class SweepRow(NamedTuple):
    penalty: float
    reward: float
    constraint: float
    objective: str


def penalty_sweep(scenario: Scenario, penalties, rng=None, settings: dict | None = None,
                  baseline: bool = True) -> list:
    """Reward and constraint value of penalized solutions for each penalty.

    A zero penalty is the reward-only search.  With ``baseline`` a final
    row with ``penalty = nan`` holds the constrained solution.
    """
    penalties = [float(p) for p in penalties]
    if not penalties:
        raise ValueError("need at least one penalty value")
    rng = np.random.default_rng(rng)
    settings = dict(SEARCH_SETTINGS if settings is None else settings)
    rows = []
    for lam in penalties:
        objective = "reward-only" if lam == 0 else "penalized"
        res = cem_search(scenario, objective, rng=rng, penalty=lam, **settings)
        rows.append(SweepRow(lam, res.reward, res.cost, objective))
    if baseline:
        res = cem_search(scenario, "constrained", rng=rng, **settings)
        rows.append(SweepRow(float("nan"), res.reward, res.cost, "constrained"))
    return rows
