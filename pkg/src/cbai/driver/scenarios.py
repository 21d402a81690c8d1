"""Driving scenarios: initial state, other cars and the known reward."""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .dynamics import HORIZON, CarState
from .features import N_FEATURES

__all__ = [
    "SCENARIO_IDS",
    "Scenario",
    "load_scenario",
    "load_scenario_file",
    "constant_velocity_track",
]

SCENARIO_IDS = ("base", "different-reward", "different-environment")


@dataclass(frozen=True, eq=False)
class Scenario:
    """A fixed traffic situation.

    Attributes
    ----------
    id : str
    initial_state : CarState
    other_car_trajectories : ndarray, shape (K, HORIZON + 1, 4)
        Precomputed states of the other cars at every time step.
    reward_weights : ndarray, shape (9,)
    """

    id: str
    initial_state: CarState
    other_car_trajectories: np.ndarray
    reward_weights: np.ndarray

    def __post_init__(self):
        traj = np.asarray(self.other_car_trajectories, dtype=np.float64).reshape(-1, HORIZON + 1, 4)
        w = np.asarray(self.reward_weights, dtype=np.float64)
        if w.shape != (N_FEATURES,):
            raise ValueError(f"reward weights need {N_FEATURES} entries")
        object.__setattr__(self, "other_car_trajectories", traj)
        object.__setattr__(self, "reward_weights", w)

    def to_dict(self) -> dict:
        s = self.initial_state
        return {
            "id": self.id,
            "initial_state": [s.x, s.y, s.heading, s.v],
            "other_car_trajectories": self.other_car_trajectories.tolist(),
            "reward_weights": self.reward_weights.tolist(),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "Scenario":
        try:
            return cls(
                id=str(raw["id"]),
                initial_state=CarState.from_array(raw["initial_state"]),
                other_car_trajectories=np.asarray(raw["other_car_trajectories"], dtype=np.float64),
                reward_weights=np.asarray(raw["reward_weights"], dtype=np.float64),
            )
        except KeyError as exc:
            raise ValueError(f"scenario is missing key {exc.args[0]!r}") from None


def constant_velocity_track(x: float, y0: float, speed: float,
                            horizon: int = HORIZON) -> np.ndarray:
    """States of a car driving straight up the street at constant speed."""
    t = np.arange(horizon + 1)
    return np.column_stack([np.full(t.size, x), y0 + speed * t,
                            np.full(t.size, np.pi / 2), np.full(t.size, speed)])


def load_scenario_file(path) -> Scenario:
    return Scenario.from_dict(json.loads(Path(path).read_text()))


def load_scenario(scenario_id: str) -> Scenario:
    """One of the bundled scenarios by id."""
    if scenario_id not in SCENARIO_IDS:
        raise ValueError(f"unknown scenario {scenario_id!r}; expected one of {SCENARIO_IDS}")
    text = resources.files("cbai.driver").joinpath("scenarios").joinpath(f"{scenario_id}.json").read_text()
    return Scenario.from_dict(json.loads(text))
