"""State features shared by the rewards and the constraint."""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from .dynamics import CarState

__all__ = [
    "N_FEATURES",
    "LANE_CENTERS",
    "STREET_HALF_WIDTH",
    "RIGHT_LANE",
    "TARGET_SPEED",
    "SPEED_LIMIT",
    "CONSTRAINT_WEIGHTS",
    "THRESHOLD",
    "features",
    "features_batch",
]

N_FEATURES = 9

# street geometry, x is lateral
LANE_CENTERS = np.array([-0.2, 0.0, 0.2])
STREET_HALF_WIDTH = 0.3
RIGHT_LANE = 0.2

TARGET_SPEED = 0.4
SPEED_LIMIT = 0.6

# lane-keeping sigmoid 1 / (1 + exp(-b d + a)), d the squared lateral
# distance to the closest lane center, switching at about 0.03
LANE_B = 10000.0
LANE_A = 10.0

# car-proximity bump exp(-b (c1 dx^2 + c2 dy^2) + b a)
CAR_A = 0.01
CAR_B = 30.0
CAR_C1 = 4.0
CAR_C2 = 1.0

# weights of (speed, right lane, off street, lane, heading, reverse, speeding,
# proximity, constant)
CONSTRAINT_WEIGHTS = np.array([0.0, 0.0, 0.3, 0.05, 0.02, 0.5, 0.3, 0.8, 0.0])
THRESHOLD = 1.0


def features_batch(states: np.ndarray, others: np.ndarray) -> np.ndarray:
    """Feature vectors for states ``(B, 4)`` given other cars ``(K, 4)``.

    Columns:

    0. ``-(v - 0.4)^2``, closeness to the target speed
    1. ``-(x - x_r)^2``, closeness to the right lane
    2. off the street
    3. sigmoid of the squared distance to the nearest lane center
    4. ``|cos(heading)|``, deviation from driving straight
    5. driving backwards
    6. above the speed limit
    7. proximity to other cars, summed over cars
    8. constant 1
    """
    x, y, h, v = states.T
    out = np.empty((states.shape[0], N_FEATURES))
    out[:, 0] = -((v - TARGET_SPEED) ** 2)
    out[:, 1] = -((x - RIGHT_LANE) ** 2)
    out[:, 2] = (np.abs(x) > STREET_HALF_WIDTH).astype(np.float64)
    lane_dist = ((x[:, None] - LANE_CENTERS[None, :]) ** 2).min(axis=1)
    out[:, 3] = expit(LANE_B * lane_dist - LANE_A)
    out[:, 4] = np.abs(np.cos(h))
    out[:, 5] = (v < 0).astype(np.float64)
    out[:, 6] = (v > SPEED_LIMIT).astype(np.float64)
    others = np.asarray(others, dtype=np.float64).reshape(-1, 4)
    if others.shape[0]:
        dx = x[:, None] - others[None, :, 0]
        dy = y[:, None] - others[None, :, 1]
        out[:, 7] = np.exp(-CAR_B * (CAR_C1 * dx ** 2 + CAR_C2 * dy ** 2) + CAR_B * CAR_A).sum(axis=1)
    else:
        out[:, 7] = 0.0
    out[:, 8] = 1.0
    return out


def features(state: CarState, other_cars) -> np.ndarray:
    """Feature vector of one state; ``other_cars`` is a sequence of states or an ``(K, 4)`` array."""
    if len(other_cars) and isinstance(other_cars[0], CarState):
        other_cars = np.array([c.as_array() for c in other_cars])
    return features_batch(state.as_array()[None], np.asarray(other_cars))[0]
