"""Closed-form Gaussian packet fields, polar decomposition and residual checks."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ComplexField, Grid, PhysicsParams, RealField, expectation, second_derivative
from .dynamics import PacketState, ode_rhs
from .errors import NullFieldError
from .potentials import PotentialModel

AMPLITUDE_FLOOR = 1e-150


@dataclass(frozen=True)
class MadelungPair:
    rho: RealField
    S: RealField


def _offset(state: PacketState, grid: Grid) -> np.ndarray:
    if not state.a > 0:
        raise ValueError("packet width must be positive")
    return grid.points - state.q


def density(state: PacketState, grid: Grid) -> RealField:
    z = _offset(state, grid)
    a2 = state.a * state.a
    return RealField(grid, np.exp(-z * z / (2.0 * a2)) / math.sqrt(2.0 * math.pi * a2))


def chirp(state: PacketState, params: PhysicsParams) -> float:
    """Curvature rate ``adot/a - nu/2`` of the phase."""
    return state.adot / state.a - 0.5 * params.nu


def phase(state: PacketState, grid: Grid, params: PhysicsParams) -> RealField:
    z = _offset(state, grid)
    k = params.mass / params.hbar
    return RealField(grid, state.S0 + k * state.qdot * z + 0.5 * k * chirp(state, params) * z * z)


def packet_at(state: PacketState, x, params: PhysicsParams) -> np.ndarray:
    """Packet values at arbitrary points (no grid required)."""
    if not state.a > 0:
        raise ValueError("packet width must be positive")
    z = np.asarray(x, dtype=float) - state.q
    a2 = state.a * state.a
    k = params.mass / params.hbar
    rho = np.exp(-z * z / (2.0 * a2)) / math.sqrt(2.0 * math.pi * a2)
    S = state.S0 + k * state.qdot * z + 0.5 * k * chirp(state, params) * z * z
    return np.sqrt(rho) * np.exp(1j * S)


def evaluate_packet(state: PacketState, grid: Grid, params: PhysicsParams) -> ComplexField:
    rho = density(state, grid)
    S = phase(state, grid, params)
    return ComplexField(grid, np.sqrt(rho.values) * np.exp(1j * S.values))


def quantum_velocity(state: PacketState, grid: Grid, params: PhysicsParams) -> RealField:
    z = _offset(state, grid)
    return RealField(grid, chirp(state, params) * z + state.qdot)


def convective_velocity(state: PacketState, grid: Grid, params: PhysicsParams) -> RealField:
    z = _offset(state, grid)
    return RealField(grid, (state.adot / state.a) * z + state.qdot)


def diffusion_coefficient(state: PacketState, params: PhysicsParams) -> float:
    return 0.5 * params.nu * state.a * state.a


def quantum_potential(state: PacketState, grid: Grid, params: PhysicsParams) -> RealField:
    z = _offset(state, grid)
    hb2m = params.hbar ** 2 / params.mass
    a2 = state.a * state.a
    return RealField(grid, hb2m / (4.0 * a2) - hb2m / (8.0 * a2 * a2) * z * z)


def bohm_potential(rho: RealField, params: PhysicsParams, order: int = 2) -> RealField:
    """Quantum potential of an arbitrary density by finite differences."""
    amp = np.sqrt(np.asarray(rho.values))
    lap = second_derivative(amp, rho.grid.dx, order)
    safe = np.maximum(amp, AMPLITUDE_FLOOR)
    return RealField(rho.grid, -0.5 * params.hbar ** 2 / params.mass * lap / safe)


def _unwrap_from(theta: np.ndarray, anchor: int) -> np.ndarray:
    S = np.empty_like(theta)
    S[anchor:] = np.unwrap(theta[anchor:])
    S[:anchor + 1] = np.unwrap(theta[:anchor + 1][::-1])[::-1]
    return S


def _fill_outward(theta: np.ndarray, good: np.ndarray, anchor: int) -> np.ndarray:
    # unreliable samples inherit the nearest reliable value on the anchor side
    out = theta.copy()
    for i in range(anchor + 1, out.size):
        if not good[i]:
            out[i] = out[i - 1]
    for i in range(anchor - 1, -1, -1):
        if not good[i]:
            out[i] = out[i + 1]
    return out


def madelung_decompose(field: ComplexField, floor: float = AMPLITUDE_FLOOR) -> MadelungPair:
    """Split a field into normalized density and continuous phase."""
    psi = np.asarray(field.values)
    amp = np.abs(psi)
    peak = amp.max()
    if not peak > 0:
        raise NullFieldError("null field")
    anchor = int(np.argmax(amp))
    good = amp >= floor
    theta = np.angle(psi)
    if not good.all():
        theta = _fill_outward(theta, good, anchor)
    S = _unwrap_from(theta, anchor)
    rho = amp * amp
    norm = float(np.dot(field.grid.weights, rho))
    return MadelungPair(RealField(field.grid, rho / norm), RealField(field.grid, S))


def log_mean(rho: RealField, floor: float = AMPLITUDE_FLOOR) -> float:
    """Density-weighted mean of ``ln rho``."""
    logs = np.log(np.maximum(rho.values, floor * floor))
    return expectation(rho, RealField(rho.grid, logs))


def gaussian_log_mean(a: float) -> float:
    return -0.5 * math.log(2.0 * math.pi * a * a) - 0.5


def log_identity_residual(state: PacketState, grid: Grid, order: int = 8,
                          support: float = 1e-10) -> float:
    """Max deviation between ``ln rho - <ln rho>`` and ``-(a^2 / 2 rho) rho''``."""
    rho = density(state, grid)
    r = np.asarray(rho.values)
    lhs = np.log(np.maximum(r, AMPLITUDE_FLOOR ** 2)) - log_mean(rho)
    d2 = second_derivative(r, grid.dx, order)
    mask = r > support * r.max()
    rhs = -0.5 * state.a ** 2 * d2[mask] / r[mask]
    return float(np.max(np.abs(lhs[mask] - rhs)))


def continuity_residual(state: PacketState, grid: Grid, params: PhysicsParams,
                        potential: PotentialModel, form: str = "convective",
                        support: float = 1e-10) -> float:
    """Max residual of the density balance with analytic derivatives.

    ``form="convective"`` checks the source-free balance with the convective
    velocity; ``form="source"`` uses the quantum velocity plus the
    logarithmic source term.
    """
    qd, _, ad, _, _ = ode_rhs(state, potential, params)
    z = _offset(state, grid)
    a = state.a
    rho = density(state, grid)
    r = np.asarray(rho.values)
    drho_dt = r * (-ad / a + z * qd / a ** 2 + z * z * ad / a ** 3)
    drho_dx = -z / a ** 2 * r
    if form == "convective":
        vel = np.asarray(convective_velocity(state, grid, params).values)
        res = drho_dt + (ad / a) * r + vel * drho_dx
    elif form == "source":
        vel = np.asarray(quantum_velocity(state, grid, params).values)
        lnr = np.log(np.maximum(r, AMPLITUDE_FLOOR ** 2))
        res = drho_dt + chirp(state, params) * r + vel * drho_dx + params.nu * r * (lnr - log_mean(rho))
    else:
        raise ValueError(f"unknown continuity form {form!r}")
    mask = r > support * r.max()
    return float(np.max(np.abs(res[mask])))


def hamilton_jacobi_residual(state: PacketState, grid: Grid, params: PhysicsParams,
                             potential: PotentialModel, variant: Optional[str] = None,
                             support: float = 1e-10) -> tuple:
    """Constant, linear and quadratic coefficients of the phase-equation residual.

    The residual is evaluated pointwise on the grid with the time derivative
    of the phase taken through the moment equations of ``variant`` and the
    phase mean taken by quadrature, then fitted by a quadratic in ``x - q``.
    """
    p = params if variant is None else params.with_variant(variant)
    m, hb, nu = p.mass, p.hbar, p.nu
    _, qdd, _, add, S0dot = ode_rhs(state, potential, p)
    z = _offset(state, grid)
    a, ad, qd = state.a, state.adot, state.qdot
    k = m / hb
    g = chirp(state, p)
    gdot = add / a - (ad / a) ** 2
    dS_dt = S0dot + k * qdd * z - k * qd * qd + 0.5 * k * gdot * z * z - k * g * z * qd
    rho = density(state, grid)
    S = phase(state, grid, p)
    S_mean = expectation(rho, S)
    V0, V1, V2 = potential.taylor(state.q, state.t)
    V = V0 + V1 * z + 0.5 * V2 * z * z
    v = g * z + qd
    Vq = np.asarray(quantum_potential(state, grid, p).values)
    R = hb * (dS_dt + nu * (np.asarray(S.values) - S_mean)) + 0.5 * m * v * v + V + Vq
    r = np.asarray(rho.values)
    mask = r > support * r.max()
    c0, c1, c2 = np.polynomial.polynomial.polyfit(z[mask], R[mask], 2)
    return float(c0), float(c1), float(c2)
