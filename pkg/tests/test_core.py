import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from schpacket.core import (ComplexField, Grid, InitialConditions, PhysicsParams, RealField,
                            boundary_ratio, check_truncation, expectation, packet_grid,
                            second_derivative, trapezoid_integral)


def test_params_validation():
    with pytest.raises(ValueError):
        PhysicsParams(mass=0.0)
    with pytest.raises(ValueError):
        PhysicsParams(hbar=-1.0)
    with pytest.raises(ValueError):
        PhysicsParams(nu=-0.1)
    with pytest.raises(ValueError):
        PhysicsParams(mean_action_variant="other")
    assert PhysicsParams(nu=0.3).with_variant("corrected").mean_action_variant == "corrected"


def test_initial_conditions_validation():
    with pytest.raises(ValueError):
        InitialConditions(a0=0.0)
    with pytest.raises(ValueError):
        InitialConditions(x0=math.inf)
    assert InitialConditions().replace(v0=2.0).v0 == 2.0


def test_grid_spacing_and_weights():
    g = Grid(-1.0, 1.0, 21)
    assert g.dx == pytest.approx(0.1)
    assert g.points[-1] == 1.0
    assert g.weights.sum() == pytest.approx(2.0)
    p = Grid(-1.0, 1.0, 20, periodic=True)
    assert p.dx == pytest.approx(0.1)
    assert p.points[-1] < 1.0
    assert p.weights.sum() == pytest.approx(2.0)
    with pytest.raises(ValueError):
        Grid(0.0, 1.0, 8)
    with pytest.raises(ValueError):
        Grid(1.0, 0.0, 32)


def test_fields_are_read_only_and_finite():
    g = Grid(0.0, 1.0, 16)
    f = RealField(g, np.ones(16))
    with pytest.raises(ValueError):
        f.values[0] = 2.0
    with pytest.raises(ValueError):
        RealField(g, np.full(16, np.nan))
    with pytest.raises(ValueError):
        ComplexField(g, np.ones(15))
    c = ComplexField(g, np.full(16, 1 + 1j))
    assert np.allclose(c.density().values, 2.0)


def test_expectation_and_integral():
    g = Grid(-10.0, 10.0, 2001)
    rho = RealField(g, np.exp(-0.5 * g.points ** 2) / math.sqrt(2 * math.pi))
    assert trapezoid_integral(rho) == pytest.approx(1.0, abs=1e-12)
    assert expectation(rho, RealField(g, g.points ** 2)) == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(ValueError, match="vanishing density"):
        expectation(RealField(g, np.zeros(g.n)), rho)


def test_truncation_check():
    g = packet_grid(0.0, 0.0, 1.0, 256)
    rho = np.exp(-0.5 * g.points ** 2)
    assert boundary_ratio(rho) < 1e-12
    check_truncation(rho)
    narrow = Grid(-2.0, 2.0, 64).points
    with pytest.raises(ValueError, match="domain too small"):
        check_truncation(np.exp(-0.5 * narrow ** 2))


@pytest.mark.parametrize("order,tol", [(2, 3e-4), (4, 1e-7), (6, 1e-9), (8, 1e-10)])
def test_second_derivative_orders(order, tol):
    g = Grid(-1.0, 1.0, 401)
    x = g.points
    d2 = second_derivative(np.sin(3 * x), g.dx, order)
    inner = slice(order, -order)
    assert np.max(np.abs(d2[inner] + 9 * np.sin(3 * x[inner]))) < tol


@settings(max_examples=30, deadline=None)
@given(lo=st.floats(-50, 50), span=st.floats(0.1, 100), n=st.integers(16, 500))
def test_grid_weights_integrate_constants(lo, span, n):
    for periodic in (False, True):
        g = Grid(lo, lo + span, n, periodic=periodic)
        assert g.weights.sum() == pytest.approx(span, rel=1e-12)
