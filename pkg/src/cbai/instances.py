"""Synthetic instance families and JSON (de)serialization."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .core import CbaiInstance, InstanceError, validate_instance

__all__ = [
    "InstanceSpec",
    "gen_irrelevant_dimensions",
    "gen_unit_sphere",
    "gen_line_1d",
    "gen_orthonormal",
    "load_instance",
    "save_instance",
    "build_instance",
    "FAMILIES",
]

FAMILIES = ("irrelevant-dimensions", "unit-sphere", "line-1d", "orthonormal", "file")
MAX_RETRIES = 100


def gen_irrelevant_dimensions(d: int, eps: float, noise_sigma: float = 0.05) -> CbaiInstance:
    """Unit vectors ``e_1..e_{d-1}`` plus ``(1 - eps) e_d`` and ``(1 + eps) e_d``.

    ``theta = phi = e_d`` and ``tau = 1``, so only the last coordinate matters and
    the optimum is ``(1 - eps) e_d`` at index ``d - 1``.
    """
    d = int(d)
    if d < 2:
        raise ValueError("d must be at least 2")
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    I = np.eye(d)
    arms = np.vstack([I[: d - 1], (1 - eps) * I[d - 1], (1 + eps) * I[d - 1]])
    return CbaiInstance(arms, I[d - 1], I[d - 1], 1.0, noise_sigma,
                        name=f"irrelevant-dimensions-d{d}-eps{eps:g}")


def _closest_pair(arms: np.ndarray) -> tuple[int, int]:
    sq = np.sum(arms ** 2, axis=1)
    dist = sq[:, None] + sq[None, :] - 2 * arms @ arms.T
    iu = np.triu_indices(arms.shape[0], k=1)
    k = int(np.argmin(dist[iu]))
    return int(iu[0][k]), int(iu[1][k])


def gen_unit_sphere(d: int, n: int, rng: np.random.Generator | int,
                    noise_sigma: float = 0.05) -> CbaiInstance:
    """``n`` arms uniform on the unit sphere in ``R^d``.

    The reward is another uniform unit vector, the constraint is ``x_i - x_j``
    for the closest pair ``i < j`` and ``tau = 0``.  Draws without a feasible
    arm are resampled up to ``MAX_RETRIES`` times.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    rng = np.random.default_rng(rng)
    for _ in range(MAX_RETRIES):
        X = rng.standard_normal((n, d))
        X /= np.linalg.norm(X, axis=1, keepdims=True)
        theta = rng.standard_normal(d)
        theta /= np.linalg.norm(theta)
        i, j = _closest_pair(X)
        phi = X[i] - X[j]
        if np.any(X @ phi <= 0.0):
            return CbaiInstance(X, theta, phi, 0.0, noise_sigma,
                                name=f"unit-sphere-d{d}-n{n}")
    raise RuntimeError(f"no feasible unit-sphere instance after {MAX_RETRIES} draws")


def gen_line_1d(noise_sigma: float = 0.05) -> CbaiInstance:
    """Ten arms ``0.1, 0.2, ..., 1.0`` on a line with ``theta = phi = 1`` and ``tau = 0.25``."""
    arms = (np.arange(1, 11) / 10.0)[:, None]
    return CbaiInstance(arms, [1.0], [1.0], 0.25, noise_sigma, name="line-1d")


def gen_orthonormal(d: int, margin: float, noise_sigma: float = 0.05) -> CbaiInstance:
    """Standard basis arms, every one at distance ``margin`` from the boundary.

    The first ``d - 1`` arms are feasible and the last is infeasible with the
    largest reward, which makes all of them relevant for the sample complexity.
    """
    d = int(d)
    phi = np.full(d, -margin)
    phi[-1] = margin
    theta = np.ones(d)
    theta[-1] = 2.0
    return CbaiInstance(np.eye(d), theta, phi, 0.0, noise_sigma,
                        name=f"orthonormal-d{d}-c{margin:g}")


def save_instance(instance: CbaiInstance, path) -> None:
    """Write ``instance`` as JSON; floats are written with ``repr`` so they round-trip."""
    Path(path).write_text(json.dumps(instance.to_dict(), indent=1) + "\n")


def load_instance(path) -> CbaiInstance:
    """Read and validate an instance JSON file.

    Raises
    ------
    InstanceError
        On malformed JSON (with line and column), missing keys or invalid data.
    """
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise InstanceError(f"{path}: top level must be an object")
    for key in ("arms", "reward", "constraint", "threshold"):
        if key not in raw:
            raise InstanceError(f"{path}: missing key {key!r}")
    try:
        return validate_instance(raw)
    except InstanceError as exc:
        raise InstanceError(f"{path}: {exc}") from None


@dataclass(frozen=True)
class InstanceSpec:
    """Recipe for an instance.

    ``parameters`` holds the family's keyword arguments, e.g. ``d`` and ``eps``
    for ``irrelevant-dimensions`` or ``path`` for ``file``.  Unit-sphere
    instances draw their arms from the run seed unless ``seed`` is given.
    """

    family: str
    parameters: dict = field(default_factory=dict)

    _required = {
        "irrelevant-dimensions": ("d", "eps"),
        "unit-sphere": ("d", "n"),
        "line-1d": (),
        "orthonormal": ("d", "margin"),
        "file": ("path",),
    }

    def __post_init__(self):
        if self.family not in self._required:
            raise ValueError(f"unknown instance family {self.family!r}; expected one of {FAMILIES}")
        missing = [k for k in self._required[self.family] if k not in self.parameters]
        if missing:
            raise ValueError(f"instance family {self.family!r} needs parameters {missing}")

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "InstanceSpec":
        raw = dict(raw)
        if "family" not in raw:
            raise ValueError("instance spec needs a 'family'")
        family = raw.pop("family")
        return cls(family, raw)

    @property
    def randomized(self) -> bool:
        return self.family == "unit-sphere" and "seed" not in self.parameters

    def label(self) -> str:
        keys = sorted(k for k in self.parameters if k != "path")
        parts = [self.family] + [f"{k}={self.parameters[k]}" for k in keys]
        if self.family == "file":
            parts.append(Path(self.parameters["path"]).stem)
        return ",".join(parts)


def build_instance(spec: InstanceSpec, seed: int = 0) -> CbaiInstance:
    """Materialize ``spec``; ``seed`` feeds randomized families."""
    p = spec.parameters
    sigma = float(p.get("noise_sigma", 0.05))
    if spec.family == "irrelevant-dimensions":
        return gen_irrelevant_dimensions(int(p["d"]), float(p["eps"]), sigma)
    if spec.family == "unit-sphere":
        s = p.get("seed", seed)
        rng = np.random.default_rng(np.random.SeedSequence([int(s), int(p["d"]), int(p["n"])]))
        return gen_unit_sphere(int(p["d"]), int(p["n"]), rng, sigma)
    if spec.family == "line-1d":
        return gen_line_1d(sigma)
    if spec.family == "orthonormal":
        return gen_orthonormal(int(p["d"]), float(p["margin"]), sigma)
    inst = load_instance(p["path"])
    if "noise_sigma" in p:
        inst = CbaiInstance(inst.arms, inst.reward, inst.constraint, inst.threshold,
                            sigma, inst.name, inst.feedback)
    return inst
