"""Greedy one-query-per-step algorithms with a never-discarded regularized log."""
from __future__ import annotations

import math

import numpy as np

from ..core import AlgorithmView
from ..estimation import ObservationLog
from ._kernels import first_event, plan_block
from .elimination import (CERTIFIED, EXHAUSTED, EliminationState, RunResult, TraceRow,
                          eliminate_masks, recommend_anytime)
from .round_based import DEFAULT_BUDGET, resolve_sigma

__all__ = ["run_greedy", "SELECT_RULES", "BOUNDS_MODES"]

SELECT_RULES = (
    "maxvar-uncertain",
    "uniform-uncertain",
    "maxvar-all",
    "uniform-all",
    "maxrew-uncertain",
    "maxrew-feasible",
)
BOUNDS_MODES = ("adaptive", "tuned")
TUNED_RIDGE = 1e-6


MIN_BLOCK = 8
MAX_BLOCK = 4096


def run_greedy(view: AlgorithmView, oracle, select: str = "maxvar-uncertain",
               bounds_mode: str = "tuned", beta: float = 0.25,
               norm_bound_S: float | None = None, arm_bound_L: float | None = None,
               ridge: float | None = None, delta: float = 0.05, budget: int = DEFAULT_BUDGET,
               noise_scale: float | None = 1.0, rng: np.random.Generator | None = None,
               trace_every: int | None = None) -> RunResult:
    """Query one arm per step, refit, and eliminate until no arm is uncertain.

    Steps are evaluated in speculative blocks: the queries of a block are
    planned as if no arm were eliminated, observed together, and replayed one
    by one.  Everything after the first step that changes the uncertain or
    feasible set is discarded unseen, so the run is the same as a step-by-step
    loop drawing fresh noise.

    Parameters
    ----------
    view : AlgorithmView
    oracle : Oracle
    select : str
        Query rule, one of

        ``maxvar-uncertain``
            arm whose observation most reduces the largest uncertainty
            ``||u||_{A^-1}`` among uncertain arms;
        ``uniform-uncertain``
            uniformly random uncertain arm;
        ``maxvar-all``
            arm with the largest ``||x||_{A^-1}`` over all arms;
        ``uniform-all``
            uniformly random arm;
        ``maxrew-uncertain``
            uncertain arm with the highest reward;
        ``maxrew-feasible``
            certified-feasible arm with the highest reward, after a warmup of
            random queries that lasts until some arm is certified feasible.

        Ties go to the lowest index.
    bounds_mode : {"tuned", "adaptive"}
        ``tuned`` uses multiplier ``sqrt(beta)``; ``adaptive`` uses the
        self-normalized bound with ``norm_bound_S`` and ``arm_bound_L``.
    beta : float
    norm_bound_S : float
        Bound on ``||phi||``; required for adaptive bounds.
    arm_bound_L : float, optional
        Bound on ``||x||``; defaults to the largest arm norm.
    ridge : float, optional
        Regularizer of the gram matrix, must be positive.  Defaults to 1 for
        adaptive bounds and ``TUNED_RIDGE`` for tuned bounds.  Tuned intervals
        carry no term for the shrinkage bias of a large ridge, so an unqueried
        arm would look certainly feasible whenever ``sqrt(beta) ||x|| <= tau``.
    delta : float
    budget : int
    noise_scale : float or None
        Sub-Gaussian scale in the adaptive bound; ``None`` takes the view's.
    rng : numpy.random.Generator, optional
        Randomness for the random query rules.  Derived from the oracle's
        stream when omitted.
    trace_every : int, optional
        Also log a trace row every this many steps.  By default rows are
        logged whenever the uncertain or feasible set changes.

    Returns
    -------
    RunResult
    """
    if select not in SELECT_RULES:
        raise ValueError(f"unknown selection rule {select!r}; expected one of {SELECT_RULES}")
    if bounds_mode not in BOUNDS_MODES:
        raise ValueError(f"unknown bounds mode {bounds_mode!r}")
    if ridge is None:
        ridge = 1.0 if bounds_mode == "adaptive" else TUNED_RIDGE
    if not ridge > 0:
        raise ValueError("greedy algorithms need a positive ridge")
    arms = view.arms
    n, d = arms.shape
    if bounds_mode == "adaptive":
        if norm_bound_S is None:
            raise ValueError("adaptive bounds need norm_bound_S")
        if arm_bound_L is None:
            arm_bound_L = float(np.linalg.norm(arms, axis=1).max())
        sigma = resolve_sigma(view, noise_scale)
    elif not beta > 0:
        raise ValueError("beta must be positive")
    if rng is None:
        rng = oracle.rng.child(0) if hasattr(oracle, "rng") else np.random.default_rng(0)
    rewards = view.rewards()

    log = ObservationLog(d, ridge=ridge)
    unc = np.ones(n, dtype=bool)
    feas = np.zeros(n, dtype=bool)
    floor = -np.inf
    tau = view.threshold
    trace = []
    queries = 0
    reason = CERTIFIED
    uncertain = np.flatnonzero(unc)
    block = MIN_BLOCK
    while uncertain.size:
        if queries >= budget:
            reason = EXHAUSTED
            break
        length = min(block, budget - queries)
        if trace_every:
            length = min(length, trace_every - queries % trace_every)
        XA = arms @ log.gram_inverse()
        G = XA @ arms.T
        if select == "maxvar-uncertain":
            chosen = plan_block(G, uncertain, 0, length)
        elif select == "maxvar-all":
            chosen = plan_block(G, uncertain, 1, length)
        elif select == "uniform-uncertain":
            chosen = uncertain[rng.integers(uncertain.size, size=length)]
        elif select == "uniform-all":
            chosen = rng.integers(n, size=length)
        elif select == "maxrew-uncertain":
            chosen = np.full(length, uncertain[np.argmax(rewards[uncertain])])
        elif feas.any():
            fidx = np.flatnonzero(feas)
            chosen = np.full(length, fidx[np.argmax(rewards[fidx])])
        else:
            chosen = rng.integers(n, size=length)
        chosen = np.asarray(chosen, dtype=np.int64)
        values = oracle.pull_many(chosen)
        steps = queries + np.arange(1, length + 1)
        if bounds_mode == "adaptive":
            mults = (sigma * np.sqrt(d * np.log((1.0 + steps * arm_bound_L ** 2 / ridge) / delta))
                     + math.sqrt(ridge) * norm_bound_S)
        else:
            mults = np.full(length, math.sqrt(beta))
        event = first_event(G, XA @ log.moment, chosen, values, mults, unc, feas, tau)
        used = length if event < 0 else event + 1
        if used < length:
            oracle.release(length - used)
        log.record_counts(arms, np.bincount(chosen[:used], minlength=n),
                          np.bincount(chosen[:used], weights=values[:used], minlength=n))
        queries += used

        XA = arms @ log.gram_inverse()
        half = mults[used - 1] * np.sqrt(np.maximum(np.einsum("ij,ij->i", XA, arms), 0.0))
        center = XA @ log.moment
        new_unc, new_feas, floor = eliminate_masks(unc, feas, center - half, center + half,
                                                   rewards, tau, floor)
        changed = new_feas is not feas or (new_unc != unc).any()
        block = MIN_BLOCK if changed else min(2 * block, MAX_BLOCK)
        if changed or (trace_every and queries % trace_every == 0):
            width = float((2 * half[uncertain]).max())
            unc, feas = new_unc, new_feas
            rec = int(np.flatnonzero(feas)[np.argmax(rewards[feas])]) if feas.any() else None
            trace.append(TraceRow(queries, queries, int(unc.sum()), int(feas.sum()), width, rec, 1))
            uncertain = np.flatnonzero(unc)
    state = EliminationState(frozenset(uncertain.tolist()),
                             frozenset(np.flatnonzero(feas).tolist()), floor, queries, queries)
    return RunResult(recommend_anytime(state, view), queries, trace, reason, state)
