"""Compiled inner loops for the greedy algorithms.

Both loops work on ``G = X A^-1 X^T``: a pull of arm ``a`` changes it by
``-G[:, a] G[a, :] / (1 + G[a, a])`` and moves the fitted values
``X phi_hat`` by ``G[:, a] (y - fit[a]) / (1 + G[a, a])``.
"""
from __future__ import annotations

import numpy as np
from numba import njit

TIE_RTOL = 1e-9


@njit(cache=True)
def _downdate(G, arm, col):
    n = G.shape[0]
    denom = 1.0 + G[arm, arm]
    for i in range(n):
        col[i] = G[i, arm]
    for i in range(n):
        ci = col[i] / denom
        for j in range(n):
            G[i, j] -= ci * col[j]
    return denom


@njit(cache=True)
def reduction_choice(G, uncertain):
    """Pull minimizing the worst remaining uncertainty over ``uncertain``.

    Candidate ``i`` leaves ``G[u, u] - G[i, u]^2 / (1 + G[i, i])`` for every
    uncertain ``u``.  Near-ties (relative ``TIE_RTOL``) in the worst case are
    resolved by the total reduction over the uncertain set, then by the
    lowest index.
    """
    n = G.shape[0]
    m = uncertain.size
    best = np.inf
    top = -np.inf
    arm = -1
    worst = np.empty(n)
    total = np.empty(n)
    for i in range(n):
        w = -np.inf
        tot = 0.0
        scale = 1.0 / (1.0 + G[i, i])
        for k in range(m):
            u = uncertain[k]
            r = G[i, u] * G[i, u] * scale
            tot += r
            rem = G[u, u] - r
            if rem > w:
                w = rem
        worst[i] = w
        total[i] = tot
        if w < best:
            best = w
    cut = best + TIE_RTOL * abs(best)
    for i in range(n):
        if worst[i] <= cut and total[i] > top:
            top = total[i]
            arm = i
    return arm


@njit(cache=True)
def plan_block(G0, uncertain, rule, length):
    """Arms chosen over ``length`` steps by a variance rule, assuming no elimination.

    ``rule`` 0 is the uncertainty-reduction rule over ``uncertain``, 1 the
    largest ``||x||_{A^-1}`` over all arms.
    """
    G = G0.copy()
    n = G.shape[0]
    col = np.empty(n)
    out = np.empty(length, dtype=np.int64)
    for s in range(length):
        if rule == 0:
            arm = reduction_choice(G, uncertain)
        else:
            arm = 0
            for i in range(1, n):
                if G[i, i] > G[arm, arm]:
                    arm = i
        out[s] = arm
        _downdate(G, arm, col)
    return out


@njit(cache=True)
def first_event(G0, fit0, chosen, values, multipliers, uncertain_mask, feasible_mask,
                threshold):
    """Replay a block of observations and return the first step changing the sets.

    Returns the 0-based step after which some arm becomes certified feasible or
    an uncertain arm becomes certified infeasible, or -1 when the whole block
    leaves both sets unchanged.
    """
    G = G0.copy()
    fit = fit0.copy()
    n = G.shape[0]
    col = np.empty(n)
    for s in range(chosen.size):
        a = chosen[s]
        resid = values[s] - fit[a]
        denom = _downdate(G, a, col)
        m = multipliers[s]
        hit = False
        for i in range(n):
            fit[i] += col[i] * resid / denom
            half = m * np.sqrt(max(G[i, i], 0.0))
            upper = fit[i] + half
            if upper <= threshold and not feasible_mask[i]:
                hit = True
            elif uncertain_mask[i] and (upper <= threshold or fit[i] - half > threshold):
                hit = True
        if hit:
            return s
    return -1
