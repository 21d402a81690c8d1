"""Point-mass car dynamics on a three-lane street."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["HORIZON", "FRICTION", "CarState", "Policy", "step", "step_batch"]

HORIZON = 20
FRICTION = 1.0


@dataclass(frozen=True)
class CarState:
    """Position ``(x, y)``, heading in radians and velocity in ``[-1, 1]``."""

    x: float
    y: float
    heading: float
    v: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.heading, self.v], dtype=np.float64)

    @classmethod
    def from_array(cls, a) -> "CarState":
        x, y, h, v = (float(t) for t in a)
        return cls(x, y, h, v)


@dataclass(frozen=True, eq=False)
class Policy:
    """Open-loop sequence of ``HORIZON`` actions ``(steering, acceleration)``."""

    actions: np.ndarray

    def __post_init__(self):
        a = np.array(self.actions, dtype=np.float64).reshape(-1, 2)
        if a.shape != (HORIZON, 2):
            raise ValueError(f"a policy needs exactly {HORIZON} actions, got {a.shape[0]}")
        if not np.all(np.isfinite(a)):
            raise ValueError("policy actions must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "actions", a)

    @classmethod
    def from_vector(cls, w) -> "Policy":
        return cls(np.asarray(w).reshape(HORIZON, 2))

    def as_vector(self) -> np.ndarray:
        return self.actions.reshape(-1).copy()


def step_batch(states: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """Advance a batch of states, shape ``(B, 4)``, by actions of shape ``(B, 2)``.

    ``(dx, dy, dheading, dv) = (v cos h, v sin h, v a1, a2 - FRICTION v)``,
    then the velocity is clipped to ``[-1, 1]``.
    """
    x, y, h, v = states.T
    a1, a2 = actions.T
    out = np.empty_like(states)
    out[:, 0] = x + v * np.cos(h)
    out[:, 1] = y + v * np.sin(h)
    out[:, 2] = h + v * a1
    out[:, 3] = np.clip(v + a2 - FRICTION * v, -1.0, 1.0)
    return out


def step(state: CarState, action) -> CarState:
    """Single-state version of :func:`step_batch`."""
    a = np.asarray(action, dtype=np.float64).reshape(1, 2)
    if not np.all(np.isfinite(a)):
        raise ValueError("action must be finite")
    return CarState.from_array(step_batch(state.as_array()[None], a)[0])
