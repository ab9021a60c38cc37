"""Propagator built from the velocity-parametrized packet family.

The family member for source point ``x0`` and velocity ``v0`` is the
Gaussian packet launched from ``x0`` with velocity ``v0`` and the width data
of ``ic_rest``. The kernel is the velocity integral of the product of the
evolved member and the conjugated plane-wave factor at t = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import _backend
from .core import ComplexField, Grid, InitialConditions, PhysicsParams, RealField
from .dynamics import PacketState, integrate_batch, integrate_trajectory
from .errors import CausalityLimitError, GridMismatchError, QuadratureError
from .potentials import PotentialModel
from .wavepacket import packet_at

T_MIN = 1e-3
EDGE_TOL = 1e-10
# centered windows reach this envelope level at their edges
EDGE_TARGET = 1e-14
KERNEL_TOL = 1e-12
# largest chirp phase (radians) across the window per velocity node
PHASE_PER_NODE = 1.75
RULES = ("gauss-legendre", "trapezoid")


@dataclass(frozen=True)
class VelocityQuadrature:
    """Quadrature over initial velocities.

    Leaving ``v_min``/``v_max`` unset selects a window centered, for every
    (x, x0) pair, on the velocity whose trajectory arrives at x.
    """

    n_v: int = 128
    rule: str = "gauss-legendre"
    v_min: Optional[float] = None
    v_max: Optional[float] = None

    def __post_init__(self):
        if int(self.n_v) != self.n_v or self.n_v < 32:
            raise ValueError(f"n_v must be an integer >= 32, got {self.n_v}")
        if self.rule not in RULES:
            raise ValueError(f"unknown quadrature rule {self.rule!r}")
        if (self.v_min is None) != (self.v_max is None):
            raise ValueError("set both v_min and v_max, or neither")
        if self.v_min is not None and not self.v_max > self.v_min:
            raise ValueError("v_max must exceed v_min")

    @property
    def fixed(self) -> bool:
        return self.v_min is not None

    def nodes(self):
        """Nodes and weights on [-1, 1]."""
        if self.rule == "gauss-legendre":
            return np.polynomial.legendre.leggauss(self.n_v)
        u = np.linspace(-1.0, 1.0, self.n_v)
        w = np.full(self.n_v, 2.0 / (self.n_v - 1))
        w[0] = w[-1] = 1.0 / (self.n_v - 1)
        return u, w


@dataclass(frozen=True)
class KernelMatrix:
    t: float
    x_grid: Grid
    x0_grid: Grid
    values: np.ndarray = field(repr=False)
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.x_grid.n, self.x0_grid.n):
            raise ValueError(f"kernel shape {v.shape} does not match grids")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite kernel entries")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def _state_at(ic: InitialConditions, potential, params, t, tol=KERNEL_TOL, backend=None) -> PacketState:
    if t == 0:
        return PacketState.initial(ic, params)
    return integrate_trajectory(ic, potential, params, [0.0, t], tol=tol, backend=backend).final


def phi_family(v0: float, ic_rest: InitialConditions, potential: PotentialModel,
               params: PhysicsParams, t: float, x) -> Union[complex, np.ndarray]:
    """Family member with initial velocity ``v0``, scaled to unit peak at t = 0."""
    state = _state_at(ic_rest.replace(v0=v0), potential, params, t)
    out = (2.0 * math.pi * ic_rest.a0 ** 2) ** 0.25 * packet_at(state, x, params)
    return complex(out) if np.ndim(out) == 0 else out


# -- quadratic potentials: closed-form dependence on (x0, v0) ---------------

_FIT_POINTS = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0), (1.0, 1.0)]
_CHECK_POINT = (-1.0, 1.0)


def _affine_maps(t, ic_rest, potential, params, tol, backend):
    """Trajectory data at ``t`` as polynomials in (x0, v0).

    Center and center velocity are affine, the phase offset quadratic, and
    the width independent of (x0, v0) for quadratic potentials.
    """
    m, hb = params.mass, params.hbar
    pts = _FIT_POINTS + [_CHECK_POINT]
    y0s = np.array([[X, V, ic_rest.a0, ic_rest.b0, m * V * X / hb] for X, V in pts])
    final = integrate_batch(y0s, potential, params, [0.0, t], tol=tol, backend=backend)[:, -1, :]
    q, p, a, ad, S = final.T
    if (np.ptp(a) > 1e-8 * a.mean() or np.ptp(ad) > 1e-8 * max(1.0, abs(ad).max())):
        raise ValueError("width depends on the initial data; potential is not quadratic")
    A = np.array([[1.0, X, V, X * X, X * V, V * V] for X, V in _FIT_POINTS])
    cS = np.linalg.solve(A, S[:6])
    Xc, Vc = _CHECK_POINT
    pred = cS @ [1.0, Xc, Vc, Xc * Xc, Xc * Vc, Vc * Vc]
    lin = np.array([[1.0, X, V] for X, V in pts])
    cq = np.array([q[0], q[1] - q[0], q[2] - q[0]])
    cp = np.array([p[0], p[1] - p[0], p[2] - p[0]])
    scale = 1e-7 * max(1.0, np.abs(S).max(), np.abs(q).max(), np.abs(p).max())
    if (abs(pred - S[6]) > scale or np.abs(lin @ cq - q).max() > scale
            or np.abs(lin @ cp - p).max() > scale):
        raise ValueError("trajectory data are not polynomial in (x0, v0); potential is not quadratic")
    return {"q": cq, "p": cp, "S": cS, "a": float(a.mean()), "adot": float(ad.mean())}


def _quadratic_rows(t, x, x0, quad, ic_rest, potential, params, tol=KERNEL_TOL, backend=None):
    """Kernel entries for arbitrary point arrays (quadratic potentials)."""
    m, hb, nu = params.mass, params.hbar, params.nu
    maps = _affine_maps(t, ic_rest, potential, params, tol, backend)
    a, ad = maps["a"], maps["adot"]
    qc, qx, qv = maps["q"]
    pc, px, pv = maps["p"]
    s = maps["S"].copy()
    s[4] -= m / hb  # conjugate plane-wave factor at t = 0
    if abs(qv) < 1e-12 * max(1.0, abs(qx)):
        raise QuadratureError("focal time: arrival point does not depend on initial velocity")
    u, w = quad.nodes()
    x = np.asarray(x, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if quad.fixed:
        vlo, vhi = quad.v_min, quad.v_max
        hw = 0.0
        X = x0[None, :]
        z_lo = x[:, None] - (qc + qx * X + qv * vlo)
        z_hi = x[:, None] - (qc + qx * X + qv * vhi)
        vstat = (x[:, None] - qc - qx * X) / qv
        inside = (vstat >= vlo) & (vstat <= vhi)
        # envelope relative to its peak: 1 at the stationary velocity when inside
        z_near = np.where(np.abs(z_lo) < np.abs(z_hi), z_lo, z_hi)
        peak = np.where(inside, 0.0, -(z_near ** 2) / (4 * a * a))
        edge = max(float(np.exp((-(z_lo ** 2) / (4 * a * a) - peak).max())),
                   float(np.exp((-(z_hi ** 2) / (4 * a * a) - peak).max())))
        centered = False
    else:
        vlo = vhi = 0.0
        hw = 2.0 * a * math.sqrt(math.log(1.0 / EDGE_TARGET)) / abs(qv)
        edge = math.exp(-(qv * hw) ** 2 / (4 * a * a))
        centered = True
    if edge > EDGE_TOL:
        raise QuadratureError(f"velocity window too narrow: edge envelope {edge:.3e} > {EDGE_TOL:.0e}")
    # quadratic phase of the velocity integrand, independent of (x, x0)
    c2 = 0.5 * m / hb * (ad / a - 0.5 * nu) * qv * qv - m / hb * pv * qv + s[5]
    span = abs(c2) * (0.5 * (vhi - vlo) if quad.fixed else hw) ** 2
    if span > PHASE_PER_NODE * quad.n_v:
        need = int(math.ceil(span / PHASE_PER_NODE))
        raise QuadratureError(f"velocity quadrature under-resolved: chirp spans {span:.0f} rad, "
                              f"use n_v >= {need}")
    coef = np.array([qc, qx, qv, pc, px, pv, *s,
                     0.5 * m / hb * (ad / a - 0.5 * nu), 0.25 / (a * a), m / hb,
                     m / (2 * math.pi * hb) * math.sqrt(ic_rest.a0 / a), hw])
    mod = _backend.get(backend)
    values = np.asarray(mod.assemble_quadratic(x, x0, u, w, centered, vlo, vhi, coef))
    meta = {"path": "quadratic", "window": "fixed" if quad.fixed else "centered",
            "edge_envelope_max": edge, "phase_span": span, "a_t": a, "adot_t": ad, "backend": _backend.name_of(mod)}
    return values, meta


# -- general potentials: one trajectory per velocity sample -----------------

def _scout_window(X, t, xs, ic_rest, potential, params, tol, backend):
    m, hb = params.mass, params.hbar
    dv = hb / (m * ic_rest.a0)
    y0s = np.array([[X, v, ic_rest.a0, ic_rest.b0, m * v * X / hb] for v in (0.0, dv)])
    fin = integrate_batch(y0s, potential, params, [0.0, t], tol=tol, backend=backend)[:, -1, :]
    slope = (fin[1, 0] - fin[0, 0]) / dv
    if abs(slope) < 1e-12:
        raise QuadratureError("focal time: arrival point does not depend on initial velocity")
    ends = sorted(((xs.min() - fin[0, 0]) / slope, (xs.max() - fin[0, 0]) / slope))
    pad = 2.0 * max(fin[:, 2]) * math.sqrt(math.log(1.0 / EDGE_TARGET)) / abs(slope)
    return ends[0] - pad, ends[1] + pad


def _general_columns(t, x, x0, quad, ic_rest, potential, params, tol, backend, max_widen=6):
    m, hb, nu = params.mass, params.hbar, params.nu
    u, w = quad.nodes()
    out = np.empty((x.size, x0.size), dtype=complex)
    edge_max = 0.0
    for j, X in enumerate(x0):
        lo, hi = (quad.v_min, quad.v_max) if quad.fixed else _scout_window(
            X, t, x, ic_rest, potential, params, tol, backend)
        mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
        for attempt in range(max_widen + 1):
            V = np.concatenate([mid + half * u, [mid - half, mid + half]])
            y0s = np.column_stack([np.full(V.size, X), V, np.full(V.size, ic_rest.a0),
                                   np.full(V.size, ic_rest.b0), m * V * X / hb])
            fin = integrate_batch(y0s, potential, params, [0.0, t], tol=tol, backend=backend)[:, -1, :]
            q, p, a, ad, S = fin.T
            d = x[:, None] - q[None, :]
            log_amp = 0.5 * np.log(ic_rest.a0 / a) - d * d / (4 * a * a)
            edge = float(np.exp(log_amp[:, -2:].max(axis=1) - log_amp.max(axis=1)).max())
            if edge <= EDGE_TOL:
                break
            if quad.fixed or attempt == max_widen:
                raise QuadratureError(
                    f"velocity window too narrow: edge envelope {edge:.3e} > {EDGE_TOL:.0e} at x0 = {X:.6g}")
            half *= 1.5
        edge_max = max(edge_max, edge)
        n = quad.n_v
        ph = (0.5 * m / hb * (ad / a - 0.5 * nu))[None, :n] * d[:, :n] ** 2 \
            + (m / hb) * p[None, :n] * d[:, :n] + (S[:n] - m * V[:n] * X / hb)[None, :]
        integrand = np.exp(log_amp[:, :n] + 1j * ph)
        out[:, j] = m / (2 * math.pi * hb) * half * (integrand @ w)
    return out, {"path": "general", "window": "fixed" if quad.fixed else "scouted",
                 "edge_envelope_max": edge_max, "backend": _backend.name_of(_backend.get(backend))}


def kernel(t: float, x_grid: Grid, x0_grid: Grid, quad: VelocityQuadrature,
           ic_rest: InitialConditions, potential: PotentialModel, params: PhysicsParams,
           t_min: float = T_MIN, tol: float = KERNEL_TOL, backend: Optional[str] = None) -> KernelMatrix:
    """Sample the propagator on ``x_grid`` x ``x0_grid`` at time ``t``.

    Only the width data ``a0``, ``b0`` of ``ic_rest`` are used; the center and
    velocity of each family member are the quadrature variables.
    """
    if not t > t_min:
        raise CausalityLimitError(
            f"causality-limit regime (t = {t:g} <= t_min = {t_min:g}), use delta_limit_check")
    x, x0 = x_grid.points, x0_grid.points
    if potential.is_quadratic:
        values, meta = _quadratic_rows(t, x, x0, quad, ic_rest, potential, params, tol, backend)
    else:
        values, meta = _general_columns(t, x, x0, quad, ic_rest, potential, params, tol, backend)
    meta.update({"variant": params.mean_action_variant, "n_v": quad.n_v, "rule": quad.rule, "t": t})
    return KernelMatrix(t, x_grid, x0_grid, values, meta)


def propagate(K: KernelMatrix, psi0: ComplexField) -> ComplexField:
    """Trapezoid contraction of the kernel with initial data over x0."""
    if psi0.grid != K.x0_grid:
        raise GridMismatchError("grid mismatch: psi0 is not sampled on the kernel's source grid")
    w = K.x0_grid.weights
    return ComplexField(K.x_grid, K.values @ (w * np.asarray(psi0.values)))


# -- weak-sense checks ------------------------------------------------------

TestFunction = Union[RealField, Callable[[np.ndarray], np.ndarray]]


def _gaussian_bump(x):
    return np.exp(-0.5 * np.asarray(x) ** 2)


def delta_limit_check(t_small: float, f: TestFunction = _gaussian_bump,
                      x_samples: Sequence[float] = (0.0, 0.5, 1.0),
                      params: Optional[PhysicsParams] = None,
                      potential: Optional[PotentialModel] = None,
                      ic_rest: Optional[InitialConditions] = None,
                      support: tuple = (-6.0, 6.0), n_v: int = 64,
                      points_per_wavelength: float = 4.0, backend: Optional[str] = None) -> float:
    """Max deviation of ``int K(x, x0; t) f(x0) dx0`` from ``f(x)``.

    ``f`` is either a field (its grid is the source grid) or a callable, in
    which case a source grid over ``support`` is sized to resolve the
    kernel's chirp. The family width defaults to ``sqrt(hbar t / 2m)``.
    """
    params = params or PhysicsParams()
    potential = potential or PotentialModel.free()
    if not potential.is_quadratic:
        raise ValueError("delta_limit_check supports quadratic potentials only")
    if not t_small > 0:
        raise ValueError("t_small must be positive")
    xs = np.asarray(x_samples, dtype=float)
    if ic_rest is None:
        ic_rest = InitialConditions(a0=math.sqrt(params.hbar * t_small / (2 * params.mass)))
    if isinstance(f, RealField):
        grid, fv = f.grid, np.asarray(f.values)
        f_at = np.interp(xs, grid.points, fv)
    else:
        lo, hi = support
        reach = max(abs(xs - lo).max(), abs(xs - hi).max())
        k_max = params.mass * reach / (params.hbar * t_small)
        n = int(math.ceil((hi - lo) * k_max * points_per_wavelength / (2 * math.pi))) + 1
        grid = Grid(lo, hi, max(n, 16))
        fv = np.asarray(f(grid.points), dtype=float)
        f_at = np.asarray(f(xs), dtype=float)
    if not np.any(fv):
        return 0.0
    quad = VelocityQuadrature(n_v=n_v)
    rows, _ = _quadratic_rows(t_small, xs, grid.points, quad, ic_rest, potential, params,
                              backend=backend)
    approx = rows @ (grid.weights * fv)
    return float(np.max(np.abs(approx - f_at)))


def _completeness_lhs(t, x, xp, quad, ic_rest, potential, params, backend=None):
    """Velocity integral of conj(Phi(v, x, t)) Phi(v, x', t) for the family centered at x."""
    m, hb = params.mass, params.hbar
    if quad.fixed:
        lo, hi = quad.v_min, quad.v_max
    else:
        span = 40.0 * hb / (m * ic_rest.a0)
        lo, hi = -span, span
    u, w = quad.nodes()
    mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    V = mid + half * u
    y0s = np.column_stack([np.full(V.size, x), V, np.full(V.size, ic_rest.a0),
                           np.full(V.size, ic_rest.b0), m * V * x / hb])
    if t == 0:
        fin = y0s
    else:
        fin = integrate_batch(y0s, potential, params, [0.0, t], tol=KERNEL_TOL, backend=backend)[:, -1, :]
    scale = (2.0 * math.pi * ic_rest.a0 ** 2) ** 0.25
    phis = np.array([scale * packet_at(PacketState.from_array(t, y), np.concatenate([[x], xp]), params)
                     for y in fin])
    return (half * w * np.conj(phis[:, 0])) @ phis[:, 1:]


def completeness_check(t: float, x_pair_grid: Grid, quad: VelocityQuadrature,
                       ic_rest: InitialConditions, potential: PotentialModel, params: PhysicsParams,
                       f: TestFunction = _gaussian_bump,
                       x_samples: Sequence[float] = (0.0, 0.5, 1.0),
                       backend: Optional[str] = None) -> float:
    """Weak-sense test of the family's completeness relation.

    Contracts the velocity integral of conj(Phi(x)) Phi(x') against ``f(x')``
    and returns the max deviation from ``(2 pi hbar / m) f(x)``, normalized by
    ``2 pi hbar / m``.
    """
    xp = x_pair_grid.points
    fv = np.asarray(f.values) if isinstance(f, RealField) else np.asarray(f(xp), dtype=float)
    f_at = np.interp(x_samples, xp, fv) if isinstance(f, RealField) else np.asarray(f(np.asarray(x_samples)))
    unit = 2.0 * math.pi * params.hbar / params.mass
    dev = 0.0
    for x, fx in zip(x_samples, f_at):
        lhs = _completeness_lhs(t, float(x), xp, quad, ic_rest, potential, params, backend)
        val = np.dot(x_pair_grid.weights * fv, lhs) / unit
        dev = max(dev, abs(val - fx))
    return float(dev)


def completeness_weight(t: float, x_pair_grid: Grid, quad: VelocityQuadrature,
                        ic_rest: InitialConditions, potential: PotentialModel, params: PhysicsParams,
                        x_samples: Sequence[float] = (0.0,), backend: Optional[str] = None) -> np.ndarray:
    """Integral over x' of the completeness left side, one value per sample point."""
    xp = x_pair_grid.points
    out = []
    for x in x_samples:
        lhs = _completeness_lhs(t, float(x), xp, quad, ic_rest, potential, params, backend)
        out.append(np.dot(x_pair_grid.weights, lhs))
    return np.array(out)


def family_overlap(v0: float, packet_ic: InitialConditions, ic_rest: InitialConditions,
                   potential: PotentialModel, params: PhysicsParams, t: float, grid: Grid) -> complex:
    """Overlap of a family member with the packet launched from ``packet_ic``."""
    member = phi_family(v0, ic_rest, potential, params, t, grid.points)
    psi = packet_at(_state_at(packet_ic, potential, params, t), grid.points, params)
    return complex(np.dot(grid.weights, np.conj(member) * psi))
