"""Round-based elimination algorithms with static confidence bounds.

Each round pulls arms according to a rounded design, discards all previous
data, refits least squares and eliminates arms.  ``run_acol`` re-solves the
design over the current uncertain set every round; ``run_round_based`` keeps
one allocation fixed and grows the rounds geometrically.
"""
from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from ..core import AlgorithmView, CbaiInstance, superlevel_arms, true_optimum
from ..design import (DesignProblem, min_pulls, prune_allocation, round_allocation,
                      solve_minmax_design)
from ..estimation import ObservationLog, static_bounds
from .elimination import (CERTIFIED, EXHAUSTED, RunResult, TraceRow, initial_state,
                          recommend_anytime, update_elimination)

__all__ = ["run_acol", "run_round_based", "acol_round_length", "geometric_round_length",
           "FLAVORS"]

FLAVORS = ("oracle-design", "g-allocation", "uniform")

DEFAULT_BUDGET = 10_000_000


def resolve_sigma(view: AlgorithmView, noise_scale: float | None) -> float:
    return view.effective_sigma if noise_scale is None else float(noise_scale)


def acol_round_length(t: int, n_arms: int, delta_t: float, epsilon: float, rho: float,
                      min_length: int = 0) -> int:
    """``max(ceil(2^(2t+3) ln(n/delta_t) (1+eps) rho), min_length)``."""
    raw = 2.0 ** (2 * t + 3) * math.log(n_arms / delta_t) * (1 + epsilon) * rho
    return max(math.ceil(raw), int(min_length))


def geometric_round_length(t: int, n_arms: int, delta_t: float, v: float,
                           min_length: int = 0) -> int:
    """``max(ceil(v^t ln(n/delta_t)), min_length)``."""
    return max(math.ceil(v ** t * math.log(n_arms / delta_t)), int(min_length))


def _check(delta, epsilon):
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")


def _round_loop(view, oracle, plan, delta, epsilon, budget, sigma) -> RunResult:
    arms = view.arms
    n, d = arms.shape
    state = initial_state(n)
    queries = 0
    trace = []
    reason = CERTIFIED
    t = 0
    while state.uncertain:
        t += 1
        delta_t = delta ** 2 / t ** 2
        weights, length = plan(t, state, delta_t)
        if queries + length > budget:
            reason = EXHAUSTED
            break
        counts = round_allocation(weights, length, epsilon).counts
        sums = oracle.pull_counts(counts)
        queries += length
        log = ObservationLog(d, ridge=0.0).record_counts(arms, counts, sums)
        bounds = static_bounds(log, arms, delta_t, sigma=sigma, on_span=True)
        before = sorted(state.uncertain)
        state = update_elimination(state, bounds, view)
        state = replace(state, round=t, queries_used=queries)
        trace.append(TraceRow(t, queries, len(state.uncertain), len(state.feasible),
                              float(bounds.width[before].max()),
                              recommend_anytime(state, view), length))
    state = replace(state, round=t, queries_used=queries)
    return RunResult(recommend_anytime(state, view), queries, trace, reason, state)


def run_acol(view: AlgorithmView, oracle, delta: float = 0.05, epsilon: float = 0.1,
             budget: int = DEFAULT_BUDGET, noise_scale: float | None = 1.0,
             design_tolerance: float = 1e-3) -> RunResult:
    """Adaptive round-based elimination.

    Round ``t`` uses confidence level ``delta_t = delta^2 / t^2``, the design
    minimizing the worst uncertainty over the current uncertain set, and
    ``N_t = max(ceil(2^(2t+3) ln(|X|/delta_t)(1+eps) rho_t), r(eps))`` pulls.

    Parameters
    ----------
    view : AlgorithmView
    oracle : Oracle
    delta : float
        Target error probability.
    epsilon : float
        Rounding slack.
    budget : int
        A round that would exceed the budget is not started.
    noise_scale : float or None
        Sub-Gaussian scale used in the bounds.  ``None`` takes the view's noise
        level.
    design_tolerance : float
        Relative gap for the per-round design solve.
    """
    _check(delta, epsilon)
    sigma = resolve_sigma(view, noise_scale)
    n = view.n_arms

    def plan(t, state, delta_t):
        problem = DesignProblem(view.arms, sorted(state.uncertain))
        sol = solve_minmax_design(problem, tolerance=design_tolerance)
        alloc = prune_allocation(sol.allocation, view.arms)
        r = min_pulls(alloc.support.size, epsilon)
        return alloc.weights, acol_round_length(t, n, delta_t, epsilon, sol.value, r)

    return _round_loop(view, oracle, plan, delta, epsilon, budget, sigma)


def fixed_allocation(source: AlgorithmView | CbaiInstance, flavor: str,
                     design_tolerance: float = 1e-4) -> np.ndarray:
    """Weights used by the fixed-allocation algorithms."""
    arms = source.arms
    n = arms.shape[0]
    if flavor == "uniform":
        return np.full(n, 1.0 / n)
    if flavor == "g-allocation":
        problem = DesignProblem(arms, np.arange(n))
    elif flavor == "oracle-design":
        if not isinstance(source, CbaiInstance):
            raise TypeError("the oracle design needs the full instance, not a view")
        targets = superlevel_arms(source, true_optimum(source))
        margins = np.abs(source.constraint_values()[targets] - source.threshold)
        if np.any(margins == 0):
            raise ValueError("an arm lies exactly on the constraint boundary")
        problem = DesignProblem(arms, targets, margins)
    else:
        raise ValueError(f"unknown flavor {flavor!r}; expected one of {FLAVORS}")
    sol = solve_minmax_design(problem, tolerance=design_tolerance)
    return prune_allocation(sol.allocation, arms).weights


def run_round_based(source: AlgorithmView | CbaiInstance, oracle, flavor: str = "g-allocation",
                    v: float = 1.9, delta: float = 0.05, epsilon: float = 0.1,
                    budget: int = DEFAULT_BUDGET, noise_scale: float | None = 1.0,
                    design_tolerance: float = 1e-4) -> RunResult:
    """Elimination with one fixed allocation and rounds of length ``ceil(v^t ln(|X|/delta_t))``.

    Parameters
    ----------
    source : AlgorithmView or CbaiInstance
        The oracle design reads the hidden constraint, so it needs the full
        instance; the other flavors only use the view.
    flavor : {"oracle-design", "g-allocation", "uniform"}
    v : float in (1, 2)
        Growth factor of the round lengths.
    """
    if not 1 < v < 2:
        raise ValueError(f"v must lie in (1, 2), got {v}")
    _check(delta, epsilon)
    weights = fixed_allocation(source, flavor, design_tolerance)
    view = source.view() if isinstance(source, CbaiInstance) else source
    sigma = resolve_sigma(view, noise_scale)
    n = view.n_arms
    r = min_pulls(np.count_nonzero(weights), epsilon)

    def plan(t, state, delta_t):
        return weights, geometric_round_length(t, n, delta_t, v, r)

    return _round_loop(view, oracle, plan, delta, epsilon, budget, sigma)
