"""Min-max experimental designs over a finite arm set and their integer rounding.

The central problem is

    min_lambda  max_{x in targets}  ||x||^2_{A_lambda^-1} / c_x^2,
    A_lambda = sum_a lambda_a a a^T,

solved by entropic mirror descent on the simplex, run as a saddle-point
iteration against a distribution over targets.  The relative gap is certified
with a linear-programming lower bound built from the gradients at the current
iterate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import linprog

from .core import Allocation, CbaiInstance, superlevel_arms, true_optimum

__all__ = [
    "DesignProblem",
    "DesignSolution",
    "RoundedDesign",
    "solve_minmax_design",
    "design_values",
    "grid_oracle_design",
    "min_pulls",
    "prune_allocation",
    "round_allocation",
    "compute_hclb",
]

_EIG_TOL = 1e-10
_SPAN_TOL = 1e-7
_PRUNE_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class DesignProblem:
    """Targets to cover with a design over ``arms``.

    Parameters
    ----------
    arms : ndarray, shape (n, d)
        Arms the design may put mass on.
    targets : sequence of int
        Indices into ``arms`` whose scaled norm enters the max.
    scales : ndarray, shape (len(targets),), optional
        Positive divisors ``c_x``; ones when omitted.
    """

    arms: np.ndarray
    targets: np.ndarray
    scales: np.ndarray = None

    def __post_init__(self):
        arms = np.atleast_2d(np.asarray(self.arms, dtype=np.float64))
        targets = np.asarray(self.targets, dtype=np.int64).reshape(-1)
        if targets.size == 0:
            raise ValueError("targets must be nonempty")
        if targets.min() < 0 or targets.max() >= arms.shape[0]:
            raise ValueError("target index out of range")
        scales = (np.ones(targets.size) if self.scales is None
                  else np.asarray(self.scales, dtype=np.float64).reshape(-1))
        if scales.shape != targets.shape:
            raise ValueError("one scale per target required")
        if not np.all(scales > 0) or not np.all(np.isfinite(scales)):
            raise ValueError("scales must be strictly positive")
        object.__setattr__(self, "arms", arms)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "scales", scales)

    @property
    def target_vectors(self) -> np.ndarray:
        return self.arms[self.targets]


class DesignSolution(NamedTuple):
    allocation: Allocation
    value: float
    converged: bool
    iterations: int
    lower_bound: float


@dataclass(frozen=True)
class RoundedDesign:
    """Integer pull counts approximating an allocation."""

    counts: np.ndarray
    total: int
    epsilon: float


def _pinv_parts(A: np.ndarray):
    w, V = np.linalg.eigh(A)
    keep = w > _EIG_TOL * max(1.0, w.max())
    Vk = V[:, keep]
    return (Vk / w[keep]) @ Vk.T, Vk @ Vk.T


def _values(lam, arms, T, c2):
    A = (arms.T * lam) @ arms
    Ainv, P = _pinv_parts(A)
    TA = T @ Ainv
    g = np.einsum("ij,ij->i", TA, T) / c2
    resid = np.linalg.norm(T - T @ P, axis=1)
    g[resid > _SPAN_TOL * (1.0 + np.linalg.norm(T, axis=1))] = np.inf
    return g, TA


def design_values(problem: DesignProblem, weights) -> np.ndarray:
    """Scaled squared norms ``||x||^2_{A^-1} / c_x^2`` of every target under ``weights``.

    Targets outside the span of the weighted arms get ``inf``.
    """
    w = np.asarray(weights, dtype=np.float64)
    g, _ = _values(w, problem.arms, problem.target_vectors, problem.scales ** 2)
    return g


def _lower_bound(lam, arms, T, c2) -> float:
    """Lower bound on the min-max value from the linearization at ``lam``.

    For any distribution ``mu`` over targets the convex function
    ``h(l) = sum_x mu_x g_x(l)`` satisfies ``min h >= 2 g(lam) @ mu - max_a grad_a``;
    the best ``mu`` is found by a small linear program.
    """
    g, TA = _values(lam, arms, T, c2)
    if not np.all(np.isfinite(g)):
        return -np.inf
    M = ((TA @ arms.T) ** 2 / c2[:, None]).T
    m = T.shape[0]
    res = linprog(
        np.concatenate([-2.0 * g, [1.0]]),
        A_ub=np.hstack([M, -np.ones((M.shape[0], 1))]),
        b_ub=np.zeros(M.shape[0]),
        A_eq=np.concatenate([np.ones(m), [0.0]])[None],
        b_eq=[1.0],
        bounds=[(0, None)] * m + [(None, None)],
        method="highs",
    )
    if res.status != 0:
        return -np.inf
    return float(-res.fun)


def _certificate(best, avg, arms, T, c2) -> float:
    """Largest lower bound over a few linearization points.

    Any weights give a valid bound.  Near-singular iterates make the gradient
    badly conditioned, so slightly smoothed copies of the best iterate are
    tried as well.
    """
    n = arms.shape[0]
    points = [best, 0.99 * best + 0.01 / n, 0.999 * best + 0.001 / n]
    if np.all(np.isfinite(avg)) and avg.sum() > 0:
        points.append(avg)
    return max(_lower_bound(p, arms, T, c2) for p in points)


def solve_minmax_design(problem: DesignProblem, tolerance: float = 1e-4,
                        max_iterations: int = 100_000, step: float = 3.0,
                        check_every: int = 50) -> DesignSolution:
    """Approximately solve the min-max design problem.

    Parameters
    ----------
    problem : DesignProblem
    tolerance : float
        Target relative gap ``(value - lower_bound) / value``.
    max_iterations : int
    step : float
        Constant ``c`` in the step schedule ``c / sqrt(k)``.  The design
        gradient is scaled by its largest entry, so ``c`` bounds the change of
        any log-weight per iteration.
    check_every : int
        Iterations between duality-gap certificates.

    Returns
    -------
    DesignSolution
        ``(allocation, value, converged, iterations, lower_bound)``.  On
        non-convergence the best iterate found is returned with
        ``converged=False``.
    """
    arms = problem.arms
    T = problem.target_vectors
    if not np.any(T):
        raise ValueError("degenerate design problem: all targets are zero vectors")
    c2 = problem.scales ** 2
    n, m = arms.shape[0], T.shape[0]

    loglam = np.zeros(n)
    logmu = np.zeros(m)
    lam_sum = np.zeros(n)
    best_val, best_lam = np.inf, np.full(n, 1.0 / n)
    lb = -np.inf
    k = 0
    for k in range(1, max_iterations + 1):
        lam = np.exp(loglam - loglam.max())
        lam /= lam.sum()
        mu = np.exp(logmu - logmu.max())
        mu /= mu.sum()
        g, TA = _values(lam, arms, T, c2)
        f = g.max()
        if f < best_val:
            best_val, best_lam = f, lam.copy()
        if not np.isfinite(f):
            # mass collapsed off the span, pull back toward uniform
            loglam = np.log(0.5 * lam + 0.5 / n)
            continue
        if f == 0.0:
            break
        grad = -((mu / c2) @ ((TA @ arms.T) ** 2))
        eta = step / math.sqrt(k)
        loglam -= eta * grad / np.abs(grad).max()
        logmu += eta * g / f
        lam_sum += lam
        if k % check_every == 0:
            avg = lam_sum / lam_sum.sum()
            g_avg, _ = _values(avg, arms, T, c2)
            if g_avg.max() < best_val:
                best_val, best_lam = g_avg.max(), avg
            lb = _certificate(best_lam, avg, arms, T, c2)
            if best_val - lb <= tolerance * best_val:
                return DesignSolution(Allocation.from_weights(best_lam, arms),
                                      float(best_val), True, k, lb)
    if np.isfinite(best_val):
        lb = _certificate(best_lam, lam_sum / max(lam_sum.sum(), 1e-300), arms, T, c2)
    converged = bool(best_val == 0.0 or best_val - lb <= tolerance * best_val)
    return DesignSolution(Allocation.from_weights(best_lam, arms), float(best_val),
                          converged, k, lb)


def _simplex_grid(n: int, K: int):
    """Yield arrays of integer compositions of ``K`` into ``n`` parts, in chunks."""
    if n == 1:
        yield np.array([[K]])
        return
    if n == 2:
        i = np.arange(K + 1)
        yield np.column_stack([i, K - i])
        return
    for first in range(K + 1):
        for rest in _simplex_grid(n - 1, K - first):
            yield np.column_stack([np.full(rest.shape[0], first), rest])


def grid_oracle_design(problem: DesignProblem, resolution: float = 1e-3):
    """Exhaustive search over simplex grid points with spacing ``resolution``.

    Intended as a reference for at most four arms.

    Returns
    -------
    (Allocation, float)
    """
    n = problem.arms.shape[0]
    if n > 4:
        raise ValueError(f"grid search supports at most 4 arms, got {n}")
    K = int(round(1.0 / resolution))
    arms = problem.arms
    T = problem.target_vectors
    c2 = problem.scales ** 2
    d = arms.shape[1]
    outer = np.einsum("ni,nj->nij", arms, arms).reshape(n, d * d)
    best_val, best_w = np.inf, None
    for chunk in _simplex_grid(n, K):
        W = chunk / K
        A = (W @ outer).reshape(-1, d, d)
        w, V = np.linalg.eigh(A)
        keep = w > _EIG_TOL * np.maximum(1.0, w.max(axis=1, keepdims=True))
        inv_w = np.where(keep, 1.0 / np.where(keep, w, 1.0), 0.0)
        # project targets on eigenvectors
        proj = np.einsum("bij,tj->bti", V.transpose(0, 2, 1), T)
        vals = np.einsum("bti,bi->bt", proj ** 2, inv_w) / c2
        out_of_span = np.einsum("bti,bi->bt", proj ** 2, ~keep)
        vals[out_of_span > (_SPAN_TOL * (1.0 + np.linalg.norm(T, axis=1))) ** 2] = np.inf
        worst = vals.max(axis=1)
        j = int(np.argmin(worst))
        if worst[j] < best_val:
            best_val, best_w = float(worst[j]), W[j]
    return Allocation.from_weights(best_w, arms), best_val


def min_pulls(support_size: int, epsilon: float) -> int:
    """Smallest total count accepted by :func:`round_allocation`.

    ``max(ceil(p / eps), ceil((p - 1)(1 + eps) / eps))``; the second term is what
    makes the per-arm ``(1 + eps)`` guarantee hold.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    p = int(support_size)
    return max(math.ceil(p / epsilon - 1e-12), math.ceil((p - 1) * (1 + epsilon) / epsilon - 1e-12))


def prune_allocation(allocation: Allocation, arms, threshold: float = _PRUNE_TOL) -> Allocation:
    """Zero weights below ``threshold`` and renormalize."""
    w = np.where(allocation.weights < threshold, 0.0, allocation.weights)
    return Allocation.from_weights(w / w.sum(), arms)


def round_allocation(allocation: Allocation | np.ndarray, n: int, epsilon: float) -> RoundedDesign:
    """Efficient apportionment of ``n`` pulls to the support of ``allocation``.

    Starts from ``ceil((n - p/2) * lambda)`` (at least one pull per support arm),
    then adds pulls to the arm minimizing ``n_i / lambda_i`` or removes them from
    the arm maximizing ``(n_i - 1) / lambda_i`` until the total is ``n``.  The
    result satisfies ``min_i n_i / lambda_i >= n - p + 1``, which gives
    ``||x||^2_{A_counts^-1} <= (1 + eps) / n * ||x||^2_{A_lambda^-1}`` for every
    ``x`` once ``n >= min_pulls(p, eps)``.

    Raises
    ------
    ValueError
        If ``n`` is below :func:`min_pulls`.
    """
    lam = np.asarray(getattr(allocation, "weights", allocation), dtype=np.float64)
    supp = np.flatnonzero(lam > 0)
    p = supp.size
    n = int(n)
    r = min_pulls(p, epsilon)
    if n < r:
        raise ValueError(f"n={n} is below the minimum {r} pulls for support {p}, eps={epsilon}")
    ls = lam[supp]
    c = np.maximum(np.ceil((n - p / 2.0) * ls), 1.0).astype(np.int64)
    while c.sum() < n:
        j = int(np.argmin(c / ls))
        c[j] += 1
    while c.sum() > n:
        cand = np.where(c > 1, (c - 1) / ls, -np.inf)
        j = int(np.argmax(cand))
        c[j] -= 1
    # restore the balance condition if the start point left it violated
    for _ in range(n):
        hi = np.where(c > 1, (c - 1) / ls, -np.inf)
        j, i = int(np.argmax(hi)), int(np.argmin(c / ls))
        if hi[j] <= c[i] / ls[i] or i == j:
            break
        c[j] -= 1
        c[i] += 1
    counts = np.zeros(lam.size, dtype=np.int64)
    counts[supp] = c
    return RoundedDesign(counts, n, float(epsilon))


def compute_hclb(instance: CbaiInstance, restricted: bool = True, tolerance: float = 1e-4,
                 max_iterations: int = 100_000) -> float:
    """Sample-complexity quantity ``min_lambda max_x ||x||^2_{A^-1} / (phi @ x - tau)^2``.

    Parameters
    ----------
    instance : CbaiInstance
    restricted : bool
        Maximize over arms with reward at least that of the optimum (``True``)
        or over all arms (``False``).

    Raises
    ------
    ValueError
        If a target arm lies exactly on the constraint boundary.
    """
    if restricted:
        targets = superlevel_arms(instance, true_optimum(instance))
    else:
        targets = np.arange(instance.n_arms)
    margins = np.abs(instance.constraint_values()[targets] - instance.threshold)
    if np.any(margins == 0):
        raise ValueError("an arm lies exactly on the constraint boundary")
    problem = DesignProblem(instance.arms, targets, margins)
    return solve_minmax_design(problem, tolerance, max_iterations).value
