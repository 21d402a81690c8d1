import functools

import numpy as np
import pytest

from cbai import CbaiInstance
from cbai.instances import gen_irrelevant_dimensions, gen_line_1d


@pytest.fixture
def irr3():
    """Irrelevant-dimensions instance, d=3, eps=0.1."""
    return gen_irrelevant_dimensions(3, 0.1)


@pytest.fixture
def line():
    return gen_line_1d()


def noiseless(inst: CbaiInstance) -> CbaiInstance:
    return CbaiInstance(inst.arms, inst.reward, inst.constraint, inst.threshold, 0.0, inst.name,
                        inst.feedback)


def random_instance(rng, n=6, d=3, sigma=0.05):
    """Random instance with at least one feasible arm."""
    while True:
        arms = rng.standard_normal((n, d))
        theta = rng.standard_normal(d)
        phi = rng.standard_normal(d)
        tau = float(rng.normal())
        vals = arms @ phi
        if (vals <= tau).any() and np.abs(vals - tau).min() > 0.05:
            return CbaiInstance(arms, theta, phi, tau, sigma, "random")


@functools.lru_cache(maxsize=None)
def base_policy_set(seed: int, k: int = 100):
    """Policy set on the base scenario, generated once per session."""
    from cbai.driver import generate_policy_set, load_scenario

    return generate_policy_set(load_scenario("base"), k, seed)


ACCEPTANCE_LINES: list = []


def report_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
