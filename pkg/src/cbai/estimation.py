"""Least-squares estimation of the constraint vector and confidence bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "RankDeficientError",
    "ObservationLog",
    "ConfidenceBounds",
    "least_squares",
    "static_bounds",
    "adaptive_bounds",
    "tuned_bounds",
    "static_multiplier",
    "adaptive_multiplier",
]

# eigenvalues below this fraction of the largest are treated as zero
_EIG_TOL = 1e-10
# recompute the maintained inverse from scratch after this many rank-one updates
_REFRESH_EVERY = 512


class RankDeficientError(np.linalg.LinAlgError):
    """Gram matrix is singular and no ridge is set."""

    def __init__(self, missing: int, dim: int):
        self.missing = missing
        super().__init__(
            f"gram matrix is singular: observations leave a {missing}-dimensional "
            f"subspace of R^{dim} unspanned"
        )


class ObservationLog:
    """Accumulated observations with running gram matrix and moment vector.

    ``gram = sum_i n_i x_i x_i^T + ridge * I`` and ``moment = sum_i s_i x_i`` where
    each entry stores an arm vector, a pull count ``n_i`` and the sum ``s_i`` of
    its observed values.  Single observations have ``n_i = 1``.

    Parameters
    ----------
    dim : int
    ridge : float, default 0
    """

    def __init__(self, dim: int, ridge: float = 0.0):
        if ridge < 0:
            raise ValueError("ridge must be nonnegative")
        self.dim = int(dim)
        self.ridge = float(ridge)
        self.gram = self.ridge * np.eye(self.dim)
        self.moment = np.zeros(self.dim)
        self.entries: list[tuple[np.ndarray, int, float]] = []
        self.n_observations = 0
        self._inv = np.eye(self.dim) / self.ridge if self.ridge > 0 else None
        self._updates = 0

    def _vec(self, arm) -> np.ndarray:
        if type(arm) is np.ndarray and arm.shape == (self.dim,) and arm.dtype == np.float64:
            return arm
        x = np.asarray(arm, dtype=np.float64).reshape(-1)
        if x.size != self.dim:
            raise ValueError(f"dimension mismatch: log has d={self.dim}, arm has {x.size}")
        return x

    def record(self, arm, value: float) -> "ObservationLog":
        """Append one observation and update gram/moment in place; returns self."""
        x = self._vec(arm)
        value = float(value)
        self.entries.append((x, 1, value))
        self.gram += x[:, None] * x
        self.moment += value * x
        self.n_observations += 1
        if self._inv is not None:
            self._updates += 1
            if self._updates >= _REFRESH_EVERY:
                self._inv = np.linalg.inv(self.gram)
                self._updates = 0
            else:
                Ax = self._inv @ x
                self._inv -= (Ax[:, None] * Ax) / (1.0 + x @ Ax)
        return self

    def record_counts(self, arms, counts, sums) -> "ObservationLog":
        """Append aggregated observations: ``counts[i]`` pulls of ``arms[i]`` summing to ``sums[i]``."""
        arms = np.asarray(arms, dtype=np.float64)
        counts = np.asarray(counts, dtype=np.int64)
        sums = np.asarray(sums, dtype=np.float64)
        if arms.ndim != 2 or arms.shape[1] != self.dim:
            raise ValueError("dimension mismatch")
        for x, c, s in zip(arms, counts, sums):
            if c > 0:
                self.entries.append((x.copy(), int(c), float(s)))
        self.gram += (arms.T * counts) @ arms
        self.moment += sums @ arms
        self.n_observations += int(counts.sum())
        if self.ridge > 0:
            self._inv = np.linalg.inv(self.gram)
            self._updates = 0
        return self

    def recompute(self) -> tuple[np.ndarray, np.ndarray]:
        """Gram and moment rebuilt from the entries."""
        gram = self.ridge * np.eye(self.dim)
        moment = np.zeros(self.dim)
        for x, c, s in self.entries:
            gram += c * np.outer(x, x)
            moment += s * x
        return gram, moment

    def gram_inverse(self) -> np.ndarray:
        """Inverse of the gram matrix; raises :class:`RankDeficientError` if singular."""
        if self._inv is not None:
            return self._inv
        w, V = np.linalg.eigh(self.gram)
        keep = w > _EIG_TOL * max(1.0, w.max())
        if not keep.all():
            raise RankDeficientError(int((~keep).sum()), self.dim)
        return (V / w) @ V.T

    def pseudo_inverse(self) -> tuple[np.ndarray, np.ndarray]:
        """Pseudo-inverse of the gram and the projector onto its range."""
        w, V = np.linalg.eigh(self.gram)
        keep = w > _EIG_TOL * max(1.0, w.max())
        Vk = V[:, keep]
        return (Vk / w[keep]) @ Vk.T, Vk @ Vk.T


@dataclass(frozen=True)
class ConfidenceBounds:
    """Per-arm interval ``[lower, upper]`` on ``phi @ x``.

    Attributes
    ----------
    lower, upper : ndarray, shape (n,)
    multiplier : float
        Factor applied to ``||x||_{A^-1}``.
    center : ndarray, shape (n,)
        Point estimate ``phi_hat @ x``.
    norms : ndarray, shape (n,)
        ``||x||_{A^-1}``; infinite for arms outside the observed span.
    """

    lower: np.ndarray
    upper: np.ndarray
    multiplier: float
    center: np.ndarray
    norms: np.ndarray

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower


def least_squares(log: ObservationLog, on_span: bool = False) -> np.ndarray:
    """Least-squares estimate ``gram^-1 @ moment``.

    With ``on_span=True`` a singular gram is handled with the pseudo-inverse,
    giving the minimum-norm solution.
    """
    if on_span:
        pinv, _ = log.pseudo_inverse()
        return pinv @ log.moment
    return log.gram_inverse() @ log.moment


def _bounds(log: ObservationLog, arms, multiplier: float, on_span: bool) -> ConfidenceBounds:
    arms = np.asarray(arms, dtype=np.float64)
    if on_span:
        inv, proj = log.pseudo_inverse()
        resid = np.linalg.norm(arms - arms @ proj, axis=1)
        outside = resid > 1e-7 * (1.0 + np.linalg.norm(arms, axis=1))
    else:
        inv = log.gram_inverse()
        outside = np.zeros(arms.shape[0], dtype=bool)
    phi_hat = inv @ log.moment
    center = arms @ phi_hat
    sq = np.einsum("ij,jk,ik->i", arms, inv, arms)
    norms = np.sqrt(np.maximum(sq, 0.0))
    norms[outside] = np.inf
    half = np.full_like(norms, np.inf)
    half[~outside] = multiplier * norms[~outside]
    return ConfidenceBounds(center - half, center + half, float(multiplier), center, norms)


def _check_delta(delta: float):
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")


def static_multiplier(n_arms: int, delta: float, sigma: float = 1.0) -> float:
    """``sigma * sqrt(2 ln(n_arms / delta))``."""
    _check_delta(delta)
    return sigma * np.sqrt(2.0 * np.log(n_arms / delta))


def adaptive_multiplier(dim: int, t: int, delta: float, ridge: float, norm_bound_S: float,
                        arm_bound_L: float, sigma: float = 1.0) -> float:
    """``sigma * sqrt(d ln((1 + t L^2 / ridge) / delta)) + sqrt(ridge) * S``."""
    _check_delta(delta)
    if ridge <= 0:
        raise ValueError("adaptive bounds need a positive ridge")
    inner = dim * math.log((1.0 + t * arm_bound_L ** 2 / ridge) / delta)
    return sigma * math.sqrt(inner) + math.sqrt(ridge) * norm_bound_S


def static_bounds(log: ObservationLog, arms, delta: float, sigma: float = 1.0,
                  on_span: bool = False) -> ConfidenceBounds:
    """Bounds valid for observations gathered under a fixed allocation.

    Parameters
    ----------
    log : ObservationLog
    arms : array_like, shape (n, d)
    delta : float in (0, 1)
    sigma : float
        Sub-Gaussian scale of the noise.
    on_span : bool
        Use the pseudo-inverse and report infinite width outside the span of
        the observed arms instead of raising on a singular gram.
    """
    arms = np.asarray(arms, dtype=np.float64)
    m = static_multiplier(arms.shape[0], delta, sigma)
    return _bounds(log, arms, m, on_span)


def adaptive_bounds(log: ObservationLog, arms, delta: float, norm_bound_S: float,
                    arm_bound_L: float, t: int | None = None,
                    sigma: float = 1.0) -> ConfidenceBounds:
    """Bounds valid for adaptively chosen queries on a ridge-regularized log.

    ``t`` defaults to the number of observations in the log.
    """
    if log.ridge <= 0:
        raise ValueError("adaptive bounds need a positive ridge")
    if t is None:
        t = log.n_observations
    m = adaptive_multiplier(log.dim, t, delta, log.ridge, norm_bound_S, arm_bound_L, sigma)
    return _bounds(log, arms, m, False)


def tuned_bounds(log: ObservationLog, arms, beta: float, on_span: bool = False) -> ConfidenceBounds:
    """Heuristic bounds with multiplier ``sqrt(beta)``; no coverage guarantee."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    return _bounds(log, arms, np.sqrt(beta), on_span)
