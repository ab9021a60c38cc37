"""Split-step Fourier solver for the full nonlinear equation.

Serves as an independent reference for the closed-form packet. The local
(potential plus logarithmic friction) part is advanced with its exact
sub-flow for a frozen density mean, the kinetic part exactly in Fourier
space, combined in a symmetric (Strang) splitting.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .core import ComplexField, Grid, PhysicsParams, check_truncation
from .errors import NullFieldError, UnstableStepError
from .potentials import PotentialModel
from .wavepacket import AMPLITUDE_FLOOR, madelung_decompose

SCHEMES = ("strang-split",)
NORM_DRIFT_LIMIT = 1e-4
# relative density below which the logarithmic term is switched off
SUPPORT_FLOOR = 1e-24


@dataclass(frozen=True)
class OracleConfig:
    """Solver settings.

    ``support_floor`` is the relative density below which the logarithmic
    term is switched off; there the tail evolves under the linear equation,
    which keeps round-off noise in far tails from being amplified.
    """

    grid: Grid
    dt: float = 1e-3
    epsilon_floor: float = AMPLITUDE_FLOOR
    scheme: str = "strang-split"
    support_floor: float = SUPPORT_FLOOR
    boundary_ratio: float = 1e-12

    def __post_init__(self):
        if not self.grid.periodic:
            raise ValueError("oracle grid must be periodic")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        if not self.epsilon_floor > 0:
            raise ValueError("epsilon_floor must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not 0 <= self.support_floor < 1:
            raise ValueError("support_floor must lie in [0, 1)")


@dataclass
class OracleRun:
    times: np.ndarray
    fields: List[ComplexField]
    norm: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    log_mean: np.ndarray
    steps: int = 0
    meta: dict = field(default_factory=dict)


def moments(psi: ComplexField) -> tuple:
    """Norm, mean, variance and mean of ``ln rho`` for ``rho = |psi|^2``."""
    rho = np.abs(np.asarray(psi.values)) ** 2
    w = psi.grid.weights
    x = psi.grid.points
    norm = float(np.dot(w, rho))
    if not norm > 0:
        raise NullFieldError("null field")
    mean = float(np.dot(w, rho * x)) / norm
    var = float(np.dot(w, rho * (x - mean) ** 2)) / norm
    logs = np.log(np.maximum(rho / norm, AMPLITUDE_FLOOR ** 2))
    log_mean = float(np.dot(w, rho * logs)) / norm
    return norm, mean, var, log_mean


def log_term(psi: ComplexField, eps: float = AMPLITUDE_FLOOR) -> ComplexField:
    """``ln psi - <ln psi>`` with the density-weighted mean and unwrapped phase."""
    pair = madelung_decompose(psi, floor=eps)
    amp = np.abs(np.asarray(psi.values))
    L = np.log(np.maximum(amp, eps)) + 1j * np.asarray(pair.S.values)
    w = psi.grid.weights * np.asarray(pair.rho.values)
    return ComplexField(psi.grid, L - np.dot(w, L))


def _local_flow(psi: np.ndarray, grid: Grid, tau: float, V: np.ndarray, params: PhysicsParams,
                config: OracleConfig) -> np.ndarray:
    nu, hb = params.nu, params.hbar
    w = grid.weights
    amp = np.abs(psi)
    rho = amp * amp
    norm0 = float(np.dot(w, rho))
    if not norm0 > 0:
        raise NullFieldError("null field")
    if nu == 0.0:
        return psi * np.exp(-1j * V * tau / hb)
    S = np.asarray(madelung_decompose(ComplexField(grid, psi), floor=config.epsilon_floor).S.values)
    la = np.log(np.maximum(amp, config.epsilon_floor))
    wr = w * rho / norm0
    Ml = float(np.dot(wr, la))
    MS = float(np.dot(wr, S))
    decay = math.exp(-nu * tau)
    g = -math.expm1(-nu * tau) / nu
    sup = rho > config.support_floor * rho.max()
    la1 = np.where(sup, Ml + (la - Ml) * decay, la)
    P = np.where(sup, S * decay - V * g / hb, S - V * tau / hb)
    amp1 = np.exp(la1)
    norm1 = float(np.dot(w, amp1 * amp1))
    drift = abs(norm1 / norm0 - 1.0)
    if drift > NORM_DRIFT_LIMIT:
        raise UnstableStepError(f"unstable step, reduce dt (normalization drift {drift:.2e})")
    amp1 *= math.sqrt(norm0 / norm1)
    rho1 = amp1 * amp1
    # phase-mean feedback, trapezoid in time over the half-step
    c = 0.5 * nu * tau * (MS + float(np.dot(w, rho1 * P)) / norm0)
    return amp1 * np.exp(1j * (P + c))


def step(psi: ComplexField, dt: float, potential: PotentialModel, params: PhysicsParams,
         config: OracleConfig, t: float = 0.0) -> ComplexField:
    """One Strang step: local half-step, kinetic step, local half-step."""
    grid = psi.grid
    if grid != config.grid:
        raise ValueError("field grid differs from the oracle grid")
    x = grid.points
    k = grid.wavenumbers()
    half = 0.5 * dt
    v = np.asarray(psi.values)
    v = _local_flow(v, grid, half, potential.value(x, t + 0.5 * half), params, config)
    v = np.fft.ifft(np.exp(-1j * params.hbar * k * k * dt / (2.0 * params.mass)) * np.fft.fft(v))
    v = _local_flow(v, grid, half, potential.value(x, t + 1.5 * half), params, config)
    return ComplexField(grid, v)


def evolve(psi0: ComplexField, times: Sequence[float], potential: PotentialModel,
           params: PhysicsParams, config: OracleConfig, keep_fields: bool = True) -> OracleRun:
    """Step from t = 0 to each requested time, sub-stepping evenly within intervals."""
    t_req = np.asarray(times, dtype=float)
    if t_req.size and (t_req[0] < 0 or np.any(np.diff(t_req) <= 0)):
        raise ValueError("times must be non-negative and strictly increasing")
    psi = psi0
    t = 0.0
    fields, stats = [], []
    n_steps = 0
    for target in t_req:
        span = target - t
        if span > 0:
            n = max(1, int(math.ceil(span / config.dt - 1e-9)))
            h = span / n
            for i in range(n):
                psi = step(psi, h, potential, params, config, t + i * h)
            n_steps += n
            t = float(target)
        rho = np.abs(np.asarray(psi.values)) ** 2
        check_truncation(rho, config.boundary_ratio)
        stats.append(moments(psi))
        fields.append(psi if keep_fields else None)
    arr = np.array(stats).reshape(-1, 4)
    return OracleRun(t_req, fields, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], n_steps,
                     {"dt": config.dt, "scheme": config.scheme, "support_floor": config.support_floor})
