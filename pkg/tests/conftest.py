"""Shared fixtures and closed-form references."""
import math

import numpy as np
import pytest

from schpacket import _backend
from schpacket.core import InitialConditions, PhysicsParams
from schpacket.potentials import PotentialModel

BACKENDS = _backend.available()


def free_gaussian(x, t, x0=0.0, v0=0.0, a0=1.0, mass=1.0, hbar=1.0):
    """Textbook free Gaussian packet with position spread ``a0`` at t = 0."""
    k0 = mass * v0 / hbar
    tau = hbar * t / (2 * mass * a0 ** 2)
    z = x - x0 - v0 * t
    norm = (2 * math.pi * a0 ** 2) ** -0.25 / np.sqrt(1 + 1j * tau)
    return norm * np.exp(-z ** 2 / (4 * a0 ** 2 * (1 + 1j * tau)) + 1j * k0 * (x - x0)
                         - 1j * hbar * k0 ** 2 * t / (2 * mass) + 1j * k0 * x0)


def a_eq(omega, nu, mass=1.0, hbar=1.0):
    """Stationary width of the damped oscillator."""
    return math.sqrt(hbar / (2 * mass)) * (omega ** 2 - nu ** 2 / 4) ** -0.25


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def unit():
    return PhysicsParams()


@pytest.fixture
def harmonic():
    return PotentialModel.harmonic(1.0)


@pytest.fixture
def rest():
    return InitialConditions()


ACCEPTANCE_LINES = []


def record(label, value, tol, passed, info=False):
    """Print and keep one acceptance line; ``info`` lines are reported, not judged."""
    tag = "INFO" if info else ("PASS" if passed else "FAIL")
    line = f"{tag} {label}: value={value:.3e} tol={tol:g}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
