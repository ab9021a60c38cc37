"""Moment equations for the packet center, width and phase offset."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from . import _backend, _fallback
from .core import InitialConditions, PhysicsParams
from .errors import (ActionInconsistencyError, IntegrationError, PotentialEvaluationError,
                     WidthCollapseError)
from .potentials import PotentialModel

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
ACTION_TOL = 1e-9

FIELDS = ("q", "qdot", "a", "adot", "S0")


@dataclass(frozen=True)
class PacketState:
    t: float
    q: float
    qdot: float
    a: float
    adot: float
    S0: float

    def __post_init__(self):
        vals = (self.t, self.q, self.qdot, self.a, self.adot, self.S0)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("packet state must be finite")

    @classmethod
    def from_array(cls, t: float, y: Sequence[float]) -> "PacketState":
        return cls(float(t), *(float(v) for v in y))

    def as_array(self) -> np.ndarray:
        return np.array([self.q, self.qdot, self.a, self.adot, self.S0])

    @classmethod
    def initial(cls, ic: InitialConditions, params: PhysicsParams) -> "PacketState":
        return cls(0.0, ic.x0, ic.v0, ic.a0, ic.b0, params.mass * ic.v0 * ic.x0 / params.hbar)


@dataclass(frozen=True)
class TrajectoryRecord:
    """States at the requested times plus integrator statistics."""

    times: np.ndarray
    states: np.ndarray  # shape (n_times, 5): q, qdot, a, adot, S0
    variant: str
    rtol: float
    n_accepted: int = 0
    n_rejected: int = 0
    max_error: float = 0.0

    def __len__(self):
        return len(self.times)

    def __getitem__(self, i) -> PacketState:
        return PacketState.from_array(self.times[i], self.states[i])

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def column(self, name: str) -> np.ndarray:
        return self.states[:, FIELDS.index(name)]

    @property
    def final(self) -> PacketState:
        return self[len(self) - 1]


def _rhs_values(t, y, potential: PotentialModel, params: PhysicsParams):
    q, qd, a, ad, _ = y
    if not a > 0:
        raise WidthCollapseError(f"width collapse: a = {a:.3e} at t = {t:.6g}")
    V, dV, d2V = potential.taylor(q, t)
    m, hb, nu = params.mass, params.hbar, params.nu
    w = a * a if params.mean_action_variant == "corrected" else 1.0
    g = ad / a - 0.5 * nu
    return (
        qd,
        -nu * qd - dV / m,
        ad,
        -a * (d2V / m - 0.25 * nu * nu) + hb * hb / (4.0 * m * m * a ** 3),
        (0.5 * m * qd * qd + 0.5 * nu * m * g * w - V - 0.25 * hb * hb / (m * a * a)) / hb,
    )


def ode_rhs(state: PacketState, potential: PotentialModel, params: PhysicsParams) -> tuple:
    """Time derivative ``(qdot, qddot, adot, addot, S0dot)`` of a packet state."""
    return _rhs_values(state.t, state.as_array(), potential, params)


def _check_times(times) -> np.ndarray:
    t = np.asarray(times, dtype=float).ravel()
    if t.size == 0:
        return t
    if not np.all(np.isfinite(t)):
        raise ValueError("times must be finite")
    if t[0] != 0.0:
        raise ValueError("times must start at 0")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    return t


def _raise_status(code: int, t_fail: float):
    if code == _fallback.COLLAPSE:
        raise WidthCollapseError(f"width collapse near t = {t_fail:.6g}")
    if code == _fallback.NONFINITE:
        raise IntegrationError(f"stiff or singular dynamics: non-finite state near t = {t_fail:.6g}")
    raise IntegrationError(f"stiff or singular dynamics: step size underflow near t = {t_fail:.6g}")


def integrate_trajectory(ic: InitialConditions, potential: PotentialModel, params: PhysicsParams,
                         times: Sequence[float], tol: float = DEFAULT_RTOL,
                         atol: float = DEFAULT_ATOL, backend: Optional[str] = None) -> TrajectoryRecord:
    """Adaptive Dormand-Prince 5(4) integration landing exactly on ``times``."""
    if not tol > 0 or not atol > 0:
        raise ValueError("tolerances must be positive")
    t = _check_times(times)
    y0 = PacketState.initial(ic, params).as_array()
    corrected = params.mean_action_variant == "corrected"
    if potential.is_polynomial:
        mod = _backend.get(backend)
        states, code, n_acc, n_rej, max_err = mod.integrate_poly(
            y0, t, potential.coefficient_array(), params.mass, params.hbar, params.nu,
            corrected, tol, atol)
    else:
        def f(tt, y):
            try:
                return _rhs_values(tt, y, potential, params)
            except WidthCollapseError:
                raise _fallback._Collapse
        states, code, n_acc, n_rej, max_err = _fallback.dopri5(f, y0, t, tol, atol)
    states = np.asarray(states)
    if code != _fallback.OK:
        bad = np.flatnonzero(~np.isfinite(states[:, 0]))
        _raise_status(code, float(t[bad[0] - 1]) if bad.size else float(t[-1]))
    return TrajectoryRecord(t, states, params.mean_action_variant, tol, int(n_acc), int(n_rej),
                            float(max_err))


def integrate_batch(y0s: np.ndarray, potential: PotentialModel, params: PhysicsParams,
                    times: Sequence[float], tol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                    backend: Optional[str] = None) -> np.ndarray:
    """Integrate many raw initial states ``(q, qdot, a, adot, S0)`` at once.

    Returns an array of shape ``(n_states, n_times, 5)``.
    """
    t = _check_times(times)
    y0s = np.atleast_2d(np.asarray(y0s, dtype=float))
    if potential.is_polynomial:
        mod = _backend.get(backend)
        states, status = mod.integrate_poly_batch(
            y0s, t, potential.coefficient_array(), params.mass, params.hbar, params.nu,
            params.mean_action_variant == "corrected", tol, atol)
        status = np.asarray(status)
        if np.any(status != 0):
            b = int(np.flatnonzero(status)[0])
            _raise_status(int(status[b]), float(t[-1]))
        return np.asarray(states)
    out = np.empty((y0s.shape[0], t.size, 5))
    for b, y0 in enumerate(y0s):
        ic = InitialConditions(y0[0], y0[1], y0[2], y0[3])
        rec = integrate_trajectory(ic, potential, params, t, tol, atol)
        out[b] = rec.states
        out[b, :, 4] += y0[4] - params.mass * y0[0] * y0[1] / params.hbar
    return out


def classical_action(record: TrajectoryRecord, potential: PotentialModel,
                     params: PhysicsParams, nodes: int = 20) -> np.ndarray:
    """Phase offset S0 at each recorded time by an independent route.

    The center and width are re-integrated with an eighth-order method and
    the S0 rate is integrated by composite Gauss-Legendre quadrature. The
    result is compared with the S0 column carried by the record.
    """
    if len(record) == 0:
        raise ValueError("record is empty")
    if params.mean_action_variant != record.variant:
        raise ValueError("record was integrated under a different mean_action_variant")
    t = record.times
    y0 = record.states[0]

    def f4(tt, y):
        return _rhs_values(tt, (y[0], y[1], y[2], y[3], 0.0), potential, params)[:4]

    S = np.empty(len(t))
    S[0] = y0[4]
    if len(t) > 1:
        sol = solve_ivp(f4, (t[0], t[-1]), y0[:4], method="DOP853", rtol=1e-12, atol=1e-13,
                        dense_output=True)
        if not sol.success:
            raise IntegrationError(f"reference integration failed: {sol.message}")
        gx, gw = np.polynomial.legendre.leggauss(nodes)
        acc = y0[4]
        for k in range(1, len(t)):
            t0, t1 = t[k - 1], t[k]
            n_sub = max(1, int(math.ceil((t1 - t0) / 0.25)))
            edges = np.linspace(t0, t1, n_sub + 1)
            for lo, hi in zip(edges[:-1], edges[1:]):
                tt = 0.5 * (hi + lo) + 0.5 * (hi - lo) * gx
                ys = sol.sol(tt)
                rate = np.array([_rhs_values(tt[i], (*ys[:, i], 0.0), potential, params)[4]
                                 for i in range(nodes)])
                acc += 0.5 * (hi - lo) * np.dot(gw, rate)
            S[k] = acc
    carried = record.states[:, 4]
    tol = max(ACTION_TOL, 10.0 * record.rtol)
    bad = np.abs(S - carried) > tol * np.maximum(1.0, np.abs(carried))
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise ActionInconsistencyError(
            f"action inconsistency at t = {t[k]:.6g}: quadrature {S[k]:.12g} vs integrator {carried[k]:.12g}")
    return S


__all__ = ["PacketState", "TrajectoryRecord", "ode_rhs", "integrate_trajectory", "integrate_batch",
           "classical_action", "PotentialEvaluationError"]
