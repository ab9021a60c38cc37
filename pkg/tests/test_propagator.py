import math

import numpy as np
import pytest

from schpacket.core import ComplexField, Grid, InitialConditions, PhysicsParams, packet_grid
from schpacket.dynamics import PacketState, integrate_trajectory
from schpacket.errors import CausalityLimitError, GridMismatchError, QuadratureError
from schpacket.potentials import PotentialModel
from schpacket.propagator import (VelocityQuadrature, completeness_check, completeness_weight,
                                  delta_limit_check, family_overlap, kernel, phi_family, propagate)
from schpacket.wavepacket import evaluate_packet

from conftest import free_gaussian


def free_kernel_errors(K, p):
    t = K.t
    ref = math.sqrt(p.mass / (2 * math.pi * p.hbar * t))
    mod = np.abs(np.abs(K.values) / ref - 1).max()
    X, X0 = np.meshgrid(K.x_grid.points, K.x0_grid.points, indexing="ij")
    ph = np.angle(K.values * np.exp(-1j * p.mass * (X - X0) ** 2 / (2 * p.hbar * t)))
    ph = np.angle(np.exp(1j * (ph - ph[0, 0])))
    return mod, np.abs(ph).max()


@pytest.mark.parametrize("mass,hbar,n_v", [(1.0, 1.0, 128), (2.0, 0.5, 192)])
def test_free_kernel_is_feynman_propagator(mass, hbar, n_v, backend):
    p = PhysicsParams(mass=mass, hbar=hbar)
    g = Grid(-4.0, 4.0, 41)
    K = kernel(0.8, g, g, VelocityQuadrature(n_v), InitialConditions(), PotentialModel.free(), p,
               backend=backend)
    mod, ph = free_kernel_errors(K, p)
    assert mod < 1e-6
    assert ph < 1e-5
    assert K.meta["path"] == "quadratic"


def test_under_resolved_velocity_quadrature_is_rejected():
    p = PhysicsParams(mass=2.0, hbar=0.5)
    g = Grid(-4.0, 4.0, 41)
    with pytest.raises(QuadratureError, match="under-resolved"):
        kernel(0.8, g, g, VelocityQuadrature(128), InitialConditions(), PotentialModel.free(), p)


def test_kernel_backends_agree():
    from schpacket import _backend
    if len(_backend.available()) < 2:
        pytest.skip("compiled backend not built")
    g = Grid(-3.0, 3.0, 31)
    args = (0.7, g, g, VelocityQuadrature(64), InitialConditions(a0=0.8), PotentialModel.harmonic(1.0),
            PhysicsParams(nu=0.3))
    a = kernel(*args, backend="python").values
    b = kernel(*args, backend="compiled").values
    assert np.allclose(a, b, rtol=1e-12, atol=1e-14)


def test_general_path_matches_quadratic_path():
    p = PhysicsParams(nu=0.2)
    fast = PotentialModel.harmonic(1.0)
    slow = PotentialModel.custom(lambda q, t: (0.5 * q * q, q, 1.0), quadratic=False)
    g = Grid(-2.0, 2.0, 16)
    quad = VelocityQuadrature(96)
    Kf = kernel(0.6, g, g, quad, InitialConditions(), fast, p)
    Ks = kernel(0.6, g, g, quad, InitialConditions(), slow, p)
    assert Ks.meta["path"] == "general"
    assert np.max(np.abs(Kf.values - Ks.values)) < 1e-8 * np.abs(Kf.values).max()


@pytest.mark.parametrize("pot", [PotentialModel.free(), PotentialModel.harmonic(1.0), PotentialModel.linear(0.7)])
def test_composition_without_friction(pot):
    p = PhysicsParams()
    ic = InitialConditions(x0=0.5, v0=0.3, a0=math.sqrt(0.5))
    x0g = Grid(-6.0, 7.0, 521)
    st = integrate_trajectory(ic, pot, p, [0.0, 1.0]).final
    xg = packet_grid(st.q, st.q, st.a, 401)
    K = kernel(1.0, xg, x0g, VelocityQuadrature(), InitialConditions(a0=ic.a0), pot, p)
    got = propagate(K, evaluate_packet(PacketState.initial(ic, p), x0g, p)).values
    ref = evaluate_packet(st, xg, p).values
    assert np.linalg.norm(got - ref) / np.linalg.norm(ref) < 1e-4


def test_propagate_free_packet_against_textbook():
    p = PhysicsParams()
    x0g = Grid(-8.0, 8.0, 641)
    xg = Grid(-8.0, 10.0, 361)
    K = kernel(1.5, xg, x0g, VelocityQuadrature(), InitialConditions(), PotentialModel.free(), p)
    psi0 = ComplexField(x0g, free_gaussian(x0g.points, 0.0, v0=1.0))
    got = propagate(K, psi0).values
    ref = free_gaussian(xg.points, 1.5, v0=1.0)
    assert np.linalg.norm(got - ref) / np.linalg.norm(ref) < 1e-6


def test_causality_limit_and_grid_mismatch():
    g = Grid(-1.0, 1.0, 16)
    args = (g, g, VelocityQuadrature(), InitialConditions(), PotentialModel.free(), PhysicsParams())
    with pytest.raises(CausalityLimitError, match="causality-limit"):
        kernel(1e-4, *args)
    K = kernel(0.5, *args)
    with pytest.raises(GridMismatchError, match="grid mismatch"):
        propagate(K, ComplexField(Grid(-1.0, 1.0, 17), np.ones(17)))


def test_narrow_fixed_window_is_rejected():
    g = Grid(-2.0, 2.0, 16)
    quad = VelocityQuadrature(64, v_min=-0.5, v_max=0.5)
    with pytest.raises(QuadratureError, match="velocity window too narrow"):
        kernel(1.0, g, g, quad, InitialConditions(), PotentialModel.free(), PhysicsParams())


def test_quadrature_validation():
    with pytest.raises(ValueError):
        VelocityQuadrature(n_v=8)
    with pytest.raises(ValueError):
        VelocityQuadrature(rule="simpson")
    with pytest.raises(ValueError):
        VelocityQuadrature(v_min=1.0)
    u, w = VelocityQuadrature(40, "trapezoid").nodes()
    assert w.sum() == pytest.approx(2.0)


def test_family_at_time_zero_is_plane_wave_times_envelope():
    x = np.linspace(-1, 1, 5)
    phi = phi_family(0.7, InitialConditions(x0=0.0, a0=2.0), PotentialModel.free(), PhysicsParams(), 0.0, x)
    assert np.allclose(phi, np.exp(-x ** 2 / 16) * np.exp(1j * 0.7 * x))


def test_delta_limit_shrinks_with_time():
    p = PhysicsParams()
    d2 = delta_limit_check(1e-2, params=p)
    d3 = delta_limit_check(1e-3, params=p)
    assert d3 < 1e-3
    assert d3 < d2


def test_delta_limit_corrected_variant_with_friction():
    p = PhysicsParams(nu=0.5, mean_action_variant="corrected")
    assert delta_limit_check(1e-3, params=p) < 1e-3


def test_delta_limit_zero_function():
    assert delta_limit_check(1e-2, f=lambda x: np.zeros_like(x)) == 0.0
    with pytest.raises(ValueError):
        delta_limit_check(1e-2, potential=PotentialModel.polynomial([0, 0, 0, 1]))


@pytest.mark.parametrize("nu", [0.0, 0.3])
def test_completeness_at_time_zero(nu):
    p = PhysicsParams(nu=nu)
    pair = Grid(-12.0, 12.0, 1201)
    quad = VelocityQuadrature(256)
    ic = InitialConditions()
    pot = PotentialModel.harmonic(1.0)
    assert completeness_check(0.0, pair, quad, ic, pot, p) < 1e-3
    w = completeness_weight(0.0, pair, quad, ic, pot, p, x_samples=(0.0, 1.0))
    assert np.allclose(w / (2 * math.pi), 1.0, atol=1e-4)


def test_overlap_is_time_independent_without_friction():
    p = PhysicsParams()
    pot = PotentialModel.harmonic(1.0)
    g = packet_grid(0.0, 0.0, 2.0, 4001, margin=10.0)
    ic = InitialConditions(x0=1.0, v0=0.2, a0=0.9)
    o0 = family_overlap(0.3, ic, InitialConditions(a0=0.9), pot, p, 0.0, g)
    o1 = family_overlap(0.3, ic, InitialConditions(a0=0.9), pot, p, 1.0, g)
    assert abs(o1 - o0) < 1e-5
