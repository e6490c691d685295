import math
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from flipflow.dynamics import State
from flipflow.model import decompose, harmonic_chain, random_spd
from flipflow.rng import make_rng

settings.register_profile(
    "flipflow", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("flipflow")


@pytest.fixture(scope="session")
def spec7():
    """random_spd(3, seed=7): the admissible N = 3 workhorse."""
    return decompose(random_spd(3, 7))


@pytest.fixture(scope="session")
def chain2():
    return decompose(harmonic_chain(2))


@pytest.fixture(scope="session")
def chain3():
    return decompose(harmonic_chain(3))


@pytest.fixture(scope="session")
def diag12():
    """V = diag(1, 2): the second mode never feels the flip."""
    return decompose(np.diag([1.0, 2.0]))


@pytest.fixture(scope="session")
def osc1():
    return decompose(np.array([[1.0]]))


@pytest.fixture
def rng():
    return make_rng(20240917)


def random_state(spec, rng, h=None):
    """A random point scaled onto H = h (default: spec.energy)."""
    h = spec.energy if h is None else h
    x = rng.standard_normal(2 * spec.n)
    psi = State.from_vector(x)
    e = 0.5 * (psi.p @ psi.p + psi.q @ spec.v_matrix @ psi.q)
    return State.from_vector(x * math.sqrt(h / e))


def unit_sphere_abs(rng, n):
    """|z| for z uniform on the unit sphere S^{n-1}."""
    z = rng.standard_normal(n)
    return np.abs(z / np.linalg.norm(z))


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion that ran."""
    mod = sys.modules.get("test_acceptance")
    lines = mod.summary_lines() if mod is not None else []
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
