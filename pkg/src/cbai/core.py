"""Problem definition and shared value types for constrained best-arm identification.

An instance consists of a finite arm matrix ``X``, a known reward vector
``theta``, a hidden constraint vector ``phi`` and a threshold ``tau``.  The goal
is the arm maximizing ``theta @ x`` subject to ``phi @ x <= tau``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

__all__ = [
    "InstanceError",
    "CbaiInstance",
    "Allocation",
    "AlgorithmView",
    "validate_instance",
    "true_optimum",
    "superlevel_arms",
    "constraint_margins",
    "min_margin",
]

FEEDBACK_MODES = ("gaussian", "binary")


class InstanceError(ValueError):
    """Raised when raw instance data fails validation."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CbaiInstance:
    """Ground-truth problem ``(X, theta, phi, tau)``.

    Use :func:`validate_instance` to build one from raw data; the constructor
    performs the same checks.

    Attributes
    ----------
    arms : ndarray, shape (n, d)
        One arm per row.
    reward : ndarray, shape (d,)
        Known reward vector.
    constraint : ndarray, shape (d,)
        Hidden constraint vector.
    threshold : float
        Feasibility threshold, an arm is feasible iff ``constraint @ x <= threshold``.
    noise_sigma : float
        Scale of the Gaussian observation noise.
    name : str
    feedback : {"gaussian", "binary"}
        Observation model used by :class:`cbai.oracle.Oracle`.
    """

    arms: np.ndarray
    reward: np.ndarray
    constraint: np.ndarray
    threshold: float
    noise_sigma: float = 0.0
    name: str = "instance"
    feedback: str = "gaussian"

    def __post_init__(self):
        arms = np.asarray(self.arms, dtype=np.float64)
        if arms.ndim != 2 or arms.shape[0] == 0 or arms.shape[1] == 0:
            raise InstanceError("empty arm set")
        d = arms.shape[1]
        reward = np.asarray(self.reward, dtype=np.float64).reshape(-1)
        constraint = np.asarray(self.constraint, dtype=np.float64).reshape(-1)
        if reward.shape != (d,) or constraint.shape != (d,):
            raise InstanceError(
                f"dimension mismatch: arms have d={d}, reward has {reward.size}, "
                f"constraint has {constraint.size}"
            )
        threshold = float(self.threshold)
        sigma = float(self.noise_sigma)
        for label, val in (("arms", arms), ("reward", reward), ("constraint", constraint),
                           ("threshold", threshold), ("noise_sigma", sigma)):
            if not np.all(np.isfinite(val)):
                raise InstanceError(f"non-finite entries in {label}")
        if sigma < 0:
            raise InstanceError("noise_sigma must be nonnegative")
        if self.feedback not in FEEDBACK_MODES:
            raise InstanceError(f"unknown feedback mode {self.feedback!r}")
        if not np.any(arms @ constraint <= threshold):
            raise InstanceError("no feasible arm")
        object.__setattr__(self, "arms", _frozen(arms))
        object.__setattr__(self, "reward", _frozen(reward))
        object.__setattr__(self, "constraint", _frozen(constraint))
        object.__setattr__(self, "threshold", threshold)
        object.__setattr__(self, "noise_sigma", sigma)
        object.__setattr__(self, "name", str(self.name))

    @property
    def n_arms(self) -> int:
        return self.arms.shape[0]

    @property
    def dim(self) -> int:
        return self.arms.shape[1]

    def constraint_values(self) -> np.ndarray:
        """True ``phi @ x`` for every arm."""
        return self.arms @ self.constraint

    def rewards(self) -> np.ndarray:
        return self.arms @ self.reward

    def feasible_mask(self) -> np.ndarray:
        return self.constraint_values() <= self.threshold

    def view(self) -> "AlgorithmView":
        return AlgorithmView.from_instance(self)

    def __eq__(self, other):
        if not isinstance(other, CbaiInstance):
            return NotImplemented
        return (
            np.array_equal(self.arms, other.arms)
            and np.array_equal(self.reward, other.reward)
            and np.array_equal(self.constraint, other.constraint)
            and self.threshold == other.threshold
            and self.noise_sigma == other.noise_sigma
            and self.name == other.name
            and self.feedback == other.feedback
        )

    __hash__ = None

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "dimension": self.dim,
            "arms": self.arms.tolist(),
            "reward": self.reward.tolist(),
            "constraint": self.constraint.tolist(),
            "threshold": self.threshold,
            "noise_sigma": self.noise_sigma,
        }
        if self.feedback != "gaussian":
            out["feedback"] = self.feedback
        return out


@dataclass(frozen=True, eq=False)
class AlgorithmView:
    """Everything an algorithm may see: the instance without its constraint vector."""

    arms: np.ndarray
    reward: np.ndarray
    threshold: float
    noise_sigma: float
    feedback: str = "gaussian"

    @classmethod
    def from_instance(cls, instance: CbaiInstance) -> "AlgorithmView":
        return cls(instance.arms, instance.reward, instance.threshold,
                   instance.noise_sigma, instance.feedback)

    @property
    def n_arms(self) -> int:
        return self.arms.shape[0]

    @property
    def dim(self) -> int:
        return self.arms.shape[1]

    @property
    def effective_sigma(self) -> float:
        """Sub-Gaussian scale of the feedback; bounded binary feedback counts as 1."""
        return 1.0 if self.feedback == "binary" else self.noise_sigma

    def rewards(self) -> np.ndarray:
        return self.arms @ self.reward


@dataclass(frozen=True, eq=False)
class Allocation:
    """Probability weights over arms together with the design matrix they induce."""

    weights: np.ndarray
    design_matrix: np.ndarray = field(default=None)

    @classmethod
    def from_weights(cls, weights, arms) -> "Allocation":
        w = np.asarray(weights, dtype=np.float64)
        if np.any(w < 0) or not np.isclose(w.sum(), 1.0, rtol=0, atol=1e-9):
            raise ValueError("weights must be nonnegative and sum to 1")
        arms = np.asarray(arms, dtype=np.float64)
        A = (arms.T * w) @ arms
        return cls(_frozen(w), _frozen(0.5 * (A + A.T)))

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0)


def validate_instance(candidate: Mapping[str, Any] | CbaiInstance) -> CbaiInstance:
    """Build a :class:`CbaiInstance` from a mapping with the JSON schema keys.

    Raises
    ------
    InstanceError
        On missing keys, an empty arm set, mismatched dimensions, non-finite
        values or when no arm satisfies the constraint.
    """
    if isinstance(candidate, CbaiInstance):
        return CbaiInstance(candidate.arms, candidate.reward, candidate.constraint,
                            candidate.threshold, candidate.noise_sigma, candidate.name,
                            candidate.feedback)
    for key in ("arms", "reward", "constraint", "threshold"):
        if key not in candidate:
            raise InstanceError(f"missing key {key!r}")
    raw_arms = candidate["arms"]
    try:
        rows = [np.asarray(a, dtype=np.float64).reshape(-1) for a in raw_arms]
    except (TypeError, ValueError) as exc:
        raise InstanceError(f"arms: {exc}") from None
    if not rows:
        raise InstanceError("empty arm set")
    dims = {r.size for r in rows}
    if len(dims) != 1:
        raise InstanceError(f"dimension mismatch among arms: {sorted(dims)}")
    arms = np.vstack(rows)
    if "dimension" in candidate and int(candidate["dimension"]) != arms.shape[1]:
        raise InstanceError(
            f"dimension mismatch: declared {candidate['dimension']}, arms have {arms.shape[1]}"
        )
    try:
        return CbaiInstance(
            arms=arms,
            reward=np.asarray(candidate["reward"], dtype=np.float64),
            constraint=np.asarray(candidate["constraint"], dtype=np.float64),
            threshold=float(candidate["threshold"]),
            noise_sigma=float(candidate.get("noise_sigma", 0.0)),
            name=str(candidate.get("name", "instance")),
            feedback=str(candidate.get("feedback", "gaussian")),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InstanceError):
            raise
        raise InstanceError(str(exc)) from None


def true_optimum(instance: CbaiInstance) -> int:
    """Index of the best feasible arm; ties go to the lowest index."""
    r = instance.rewards()
    r = np.where(instance.feasible_mask(), r, -np.inf)
    return int(np.argmax(r))


def superlevel_arms(instance: CbaiInstance | AlgorithmView, pivot: int) -> np.ndarray:
    """Sorted indices of arms whose reward is at least that of ``pivot``."""
    n = instance.arms.shape[0]
    if not 0 <= pivot < n:
        raise IndexError(f"arm index {pivot} out of range for {n} arms")
    r = instance.arms @ instance.reward
    return np.flatnonzero(r >= r[pivot])


def constraint_margins(instance: CbaiInstance) -> np.ndarray:
    """Distance ``|phi @ x - tau|`` of every arm to the constraint boundary."""
    return np.abs(instance.constraint_values() - instance.threshold)


def min_margin(instance: CbaiInstance) -> float:
    """Smallest distance of any arm to the boundary."""
    return float(constraint_margins(instance).min())
