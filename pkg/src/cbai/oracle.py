"""Noisy constraint feedback with reproducible random streams."""
from __future__ import annotations

import numpy as np

from .core import CbaiInstance

__all__ = [
    "OracleRng",
    "observe_gaussian",
    "observe_binary",
    "Oracle",
]

_MASK64 = (1 << 64) - 1


class OracleRng:
    """Random stream identified by ``(seed, stream_id)``.

    Two objects with the same pair produce identical draws.  ``child`` derives
    independent streams, e.g. for an algorithm's own randomization.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        self.generator = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,)))
        )

    def child(self, tag: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, int(tag) + 1))
        return np.random.Generator(np.random.PCG64(ss))

    def __repr__(self):
        return f"OracleRng(seed={self.seed}, stream_id={self.stream_id})"


def _check_arm(instance: CbaiInstance, arm: int) -> int:
    arm = int(arm)
    if not 0 <= arm < instance.n_arms:
        raise IndexError(f"arm index {arm} out of range for {instance.n_arms} arms")
    return arm


def observe_gaussian(instance: CbaiInstance, arm: int, rng: OracleRng) -> float:
    """One observation ``phi @ x + eta`` with ``eta ~ N(0, sigma^2)``."""
    arm = _check_arm(instance, arm)
    mean = float(instance.arms[arm] @ instance.constraint)
    z = rng.generator.standard_normal()
    return mean + instance.noise_sigma * z


# slack for round-off in normalized instances
_BINARY_TOL = 1e-9


def _binary_prob(values: np.ndarray) -> np.ndarray:
    bad = np.abs(values) > 1.0 + _BINARY_TOL
    if np.any(bad):
        raise ValueError(
            "binary feedback requires constraint values in [-1, 1], got "
            f"{values[bad][:3]}"
        )
    return np.clip((values + 1.0) / 2.0, 0.0, 1.0)


def observe_binary(instance: CbaiInstance, arm: int, rng: OracleRng) -> float:
    """One observation in {-1, +1} with ``P(+1) = (phi @ x + 1) / 2``."""
    arm = _check_arm(instance, arm)
    p = _binary_prob(np.array([instance.arms[arm] @ instance.constraint]))[0]
    return 1.0 if rng.generator.random() < p else -1.0


class Oracle:
    """Query interface handed to the algorithms.

    Wraps the ground-truth instance so that algorithms only ever see
    observations.  Counts every query.

    Parameters
    ----------
    instance : CbaiInstance
    rng : OracleRng
    """

    def __init__(self, instance: CbaiInstance, rng: OracleRng):
        self._instance = instance
        self.rng = rng
        self.queries = 0
        self._means = instance.constraint_values()
        if instance.feedback == "binary":
            self._probs = _binary_prob(self._means)

    @property
    def n_arms(self) -> int:
        return self._instance.n_arms

    def pull(self, arm: int) -> float:
        """A single noisy observation of arm ``arm``."""
        self.queries += 1
        if self._instance.feedback == "binary":
            return observe_binary(self._instance, arm, self.rng)
        return observe_gaussian(self._instance, arm, self.rng)

    def pull_many(self, arms) -> np.ndarray:
        """One observation for each entry of the index sequence ``arms``."""
        arms = np.asarray(arms, dtype=np.int64)
        if arms.size and (arms.min() < 0 or arms.max() >= self.n_arms):
            raise IndexError("arm index out of range")
        self.queries += arms.size
        g = self.rng.generator
        if self._instance.feedback == "binary":
            return np.where(g.random(arms.size) < self._probs[arms], 1.0, -1.0)
        return self._means[arms] + self._instance.noise_sigma * g.standard_normal(arms.size)

    def release(self, k: int) -> None:
        """Uncount ``k`` observations drawn speculatively and never used."""
        if not 0 <= k <= self.queries:
            raise ValueError("cannot release more queries than were made")
        self.queries -= int(k)

    def pull_counts(self, counts) -> np.ndarray:
        """Sum of ``counts[i]`` independent observations of each arm ``i``.

        Sums are drawn from their exact distribution (Gaussian or shifted
        binomial) instead of one draw per query.
        """
        counts = np.asarray(counts, dtype=np.int64)
        if counts.shape != (self.n_arms,) or np.any(counts < 0):
            raise ValueError("counts must be a nonnegative integer per arm")
        self.queries += int(counts.sum())
        g = self.rng.generator
        if self._instance.feedback == "binary":
            ups = g.binomial(counts, self._probs)
            return (2 * ups - counts).astype(np.float64)
        z = g.standard_normal(self.n_arms)
        return counts * self._means + self._instance.noise_sigma * np.sqrt(counts) * z
