"""Named residual and invariant checks aggregated into one report."""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass
from typing import Callable, List, Optional

import numpy as np

from .config import OracleSpec, PropagatorSpec, ScenarioConfig
from .core import Grid, InitialConditions, packet_grid
from .dynamics import PacketState, classical_action, integrate_trajectory
from .errors import NumericalError
from .oracle import evolve
from .potentials import PotentialModel
from .propagator import (completeness_check, completeness_weight, delta_limit_check, family_overlap,
                         kernel, propagate, VelocityQuadrature)
from .wavepacket import (continuity_residual, evaluate_packet, gaussian_log_mean, hamilton_jacobi_residual,
                         log_identity_residual, log_mean, density)


@dataclass
class Check:
    name: str
    value: Optional[float]
    tolerance: Optional[float]
    passed: bool
    asserted: bool = True
    note: str = ""
    seconds: float = 0.0


def _measure(name, fn: Callable[[], float], tol: float, asserted: bool = True, note: str = "",
             compare: str = "lt") -> Check:
    t0 = time.perf_counter()
    try:
        value = float(fn())
    except (NumericalError, ValueError) as exc:
        return Check(name, None, tol, False, asserted, f"{type(exc).__name__}: {exc}",
                     time.perf_counter() - t0)
    ok = value < tol if compare == "lt" else value >= tol
    ok = bool(ok and math.isfinite(value))
    return Check(name, value, tol, ok, asserted, note, time.perf_counter() - t0)


def _states(cfg: ScenarioConfig, times):
    return integrate_trajectory(cfg.initial, cfg.potential, cfg.physics, times, cfg.rtol, cfg.atol)


def _state_grid(s: PacketState, n: int = 2048) -> Grid:
    return packet_grid(s.q, s.q, s.a, n)


def run_suite(cfg: ScenarioConfig, include_oracle: bool = True) -> List[Check]:
    p, pot, ic = cfg.physics, cfg.potential, cfg.initial
    times = np.asarray(cfg.times) if len(cfg.times) > 1 else np.linspace(0.0, 5.0, 11)
    rec = _states(cfg, times)
    probe = [rec[i] for i in sorted({0, len(rec) // 2, len(rec) - 1})]
    checks: List[Check] = []
    add = checks.append

    add(_measure("trajectory.action_consistency",
                 lambda: np.max(np.abs(classical_action(rec, pot, p) - rec.column("S0"))),
                 max(1e-9, 10 * cfg.rtol) * max(1.0, np.abs(rec.column("S0")).max())))
    add(_measure("trajectory.width_positive", lambda: rec.column("a").min(), 0.0, compare="ge"))
    add(_measure("wavepacket.normalization",
                 lambda: max(abs(np.dot(g.weights, np.abs(evaluate_packet(s, g, p).values) ** 2) - 1.0)
                             for s in probe for g in [_state_grid(s)]), 1e-10))
    add(_measure("wavepacket.log_identity",
                 lambda: max(log_identity_residual(s, _state_grid(s)) for s in probe), 1e-6))
    add(_measure("wavepacket.log_mean",
                 lambda: max(abs(log_mean(density(s, _state_grid(s))) - gaussian_log_mean(s.a)) for s in probe),
                 1e-8))
    add(_measure("wavepacket.continuity_convective",
                 lambda: max(continuity_residual(s, _state_grid(s), p, pot) for s in probe), 1e-10))
    add(_measure("wavepacket.continuity_source",
                 lambda: max(continuity_residual(s, _state_grid(s), p, pot, "source") for s in probe), 1e-10))

    if pot.is_quadratic:
        coeffs = [hamilton_jacobi_residual(s, _state_grid(s), p, pot) for s in rec]
        c = np.abs(np.array(coeffs))
        c0_asserted = p.mean_action_variant == "corrected" or p.nu == 0.0
        add(Check("hamilton_jacobi.c1", float(c[:, 1].max()), 1e-8, bool(c[:, 1].max() < 1e-8)))
        add(Check("hamilton_jacobi.c2", float(c[:, 2].max()), 1e-8, bool(c[:, 2].max() < 1e-8)))
        add(Check("hamilton_jacobi.c0", float(c[:, 0].max()), 1e-8, bool(c[:, 0].max() < 1e-8),
                  asserted=c0_asserted,
                  note="" if c0_asserted else f"reported only under variant {p.mean_action_variant!r}"))

    if include_oracle and cfg.oracle is not None:
        checks.extend(_oracle_checks(cfg, rec))

    prop = cfg.propagator or PropagatorSpec()
    checks.extend(_propagator_checks(cfg, prop))
    return checks


def _oracle_checks(cfg: ScenarioConfig, rec) -> List[Check]:
    section: OracleSpec = cfg.oracle
    p, pot = cfg.physics, cfg.potential
    oc = section.build()
    out: List[Check] = []
    t0 = time.perf_counter()
    try:
        psi0 = evaluate_packet(rec[0], oc.grid, p)
        run = evolve(psi0, rec.times, pot, p, oc, keep_fields=False)
    except (NumericalError, ValueError) as exc:
        note = f"{type(exc).__name__}: {exc}"
        return [Check(n, None, tol, False, True, note) for n, tol in
                (("oracle.mean_vs_center", 1e-4), ("oracle.width_vs_a", 1e-4), ("oracle.norm_drift", 1e-8))]
    dt = time.perf_counter() - t0
    out.append(Check("oracle.mean_vs_center", float(np.abs(run.mean - rec.column("q")).max()), 1e-4,
                     bool(np.abs(run.mean - rec.column("q")).max() < 1e-4), seconds=dt))
    werr = float(np.abs(np.sqrt(run.variance) - rec.column("a")).max())
    out.append(Check("oracle.width_vs_a", werr, 1e-4, werr < 1e-4))
    drift = float(np.abs(run.norm - 1.0).max())
    out.append(Check("oracle.norm_drift", drift, 1e-8, drift < 1e-8))

    t0 = time.perf_counter()
    try:
        fields = []
        for dt_ in (0.04, 0.02, 0.01):
            cfg_ = OracleSpec(section.x_min, section.x_max, section.n, dt_, section.epsilon_floor,
                              section.support_floor).build()
            fields.append(evolve(psi0, [0.0, 0.5], pot, p, cfg_).fields[-1].values)
        e1 = np.linalg.norm(fields[0] - fields[1])
        e2 = np.linalg.norm(fields[1] - fields[2])
        # free frictionless runs split exactly; the ratio is then round-off noise
        exact = e1 < 1e-10 * np.linalg.norm(fields[2])
        r = float(e1 / e2) if e2 > 0 else math.inf
        out.append(Check("oracle.strang_ratio", r, 3.5, bool(r >= 3.5) or exact, asserted=not exact,
                         note="splitting is exact for this scenario" if exact else "",
                         seconds=time.perf_counter() - t0))
    except (NumericalError, ValueError) as exc:
        out.append(Check("oracle.strang_ratio", None, 3.5, False, True, f"{type(exc).__name__}: {exc}"))
    return out


def _propagator_checks(cfg: ScenarioConfig, prop: PropagatorSpec) -> List[Check]:
    p, pot, ic = cfg.physics, cfg.potential, cfg.initial
    out: List[Check] = []
    quad = prop.quadrature()
    t = prop.t
    ic_rest = InitialConditions(a0=ic.a0, b0=ic.b0)

    if p.nu == 0.0 and pot.kind == "free":
        g = Grid(-4.0, 4.0, 41)

        def free_kernel():
            K = kernel(t, g, g, quad, ic_rest, pot, p, t_min=prop.t_min)
            ref = math.sqrt(p.mass / (2 * math.pi * p.hbar * t))
            mod = float(np.abs(np.abs(K.values) / ref - 1).max())
            X, X0 = np.meshgrid(g.points, g.points, indexing="ij")
            ph = np.angle(K.values * np.exp(-1j * p.mass * (X - X0) ** 2 / (2 * p.hbar * t)))
            ph = np.angle(np.exp(1j * (ph - ph[0, 0])))
            return mod, float(np.abs(ph).max())
        try:
            mod, ph = free_kernel()
            out.append(Check("propagator.free_modulus", mod, 1e-6, mod < 1e-6))
            out.append(Check("propagator.free_phase", ph, 1e-5, ph < 1e-5))
        except (NumericalError, ValueError) as exc:
            out.append(Check("propagator.free_kernel", None, 1e-6, False, True, str(exc)))

    def composition():
        st = integrate_trajectory(ic, pot, p, [0.0, t], cfg.rtol, cfg.atol).final
        s0 = PacketState.initial(ic, p)
        x0g = prop.x0_grid.build() if prop.x0_grid else packet_grid(ic.x0, ic.x0, ic.a0, 401)
        xg = cfg.grid.build() if cfg.grid else packet_grid(st.q, st.q, st.a, 401)
        K = kernel(t, xg, x0g, quad, ic_rest, pot, p, t_min=prop.t_min)
        got = propagate(K, evaluate_packet(s0, x0g, p)).values
        ref = evaluate_packet(st, xg, p).values
        return np.linalg.norm(got - ref) / np.linalg.norm(ref)
    comp_asserted = p.nu == 0.0
    out.append(_measure("propagator.composition_rel_l2", composition, 1e-4, asserted=comp_asserted,
                        note="" if comp_asserted else "reported only for nu > 0"))

    if pot.is_quadratic:
        # variant "paper" adds a velocity-independent phase that survives t -> 0
        dl_asserted = p.mean_action_variant == "corrected" or p.nu == 0.0
        dl_note = "" if dl_asserted else "reported only under variant 'paper' with nu > 0"
        d3 = _measure("propagator.delta_limit_t1e-3",
                      lambda: delta_limit_check(1e-3, params=p, potential=pot), 1e-3,
                      asserted=dl_asserted, note=dl_note)
        out.append(d3)

        def monotone():
            d2 = delta_limit_check(1e-2, params=p, potential=pot)
            return d2 - (d3.value if d3.value is not None else math.inf)
        out.append(_measure("propagator.delta_limit_decrease", monotone, 0.0, compare="ge",
                            asserted=dl_asserted,
                            note=dl_note or "deviation at t=1e-2 minus deviation at t=1e-3"))

    pair = Grid(-12.0, 12.0, 1201)
    cq = VelocityQuadrature(n_v=256)
    out.append(_measure("propagator.completeness_t0",
                        lambda: completeness_check(0.0, pair, cq, ic_rest, pot, p), 1e-3))
    out.append(_measure("propagator.completeness_weight_t0",
                        lambda: np.abs(completeness_weight(0.0, pair, cq, ic_rest, pot, p)
                                       / (2 * math.pi * p.hbar / p.mass) - 1).max(), 1e-4))
    out.append(_measure("propagator.completeness_t", lambda: completeness_check(t, pair, cq, ic_rest, pot, p),
                        1e-3, asserted=False, note="reported only for t > 0"))

    def overlap_drift():
        g = packet_grid(0.0, 0.0, 2.0, 4001, margin=10.0)
        o0 = family_overlap(0.3, ic, ic_rest, pot, p, 0.0, g)
        o1 = family_overlap(0.3, ic, ic_rest, pot, p, t, g)
        return abs(o1 - o0)
    ov_asserted = p.nu == 0.0
    out.append(_measure("propagator.overlap_time_independence", overlap_drift, 1e-5, asserted=ov_asserted,
                        note="" if ov_asserted else "reported only for nu > 0"))
    return out


def report(checks: List[Check], cfg: ScenarioConfig) -> dict:
    return {
        "variant": cfg.physics.mean_action_variant,
        "all_passed": all(c.passed for c in checks if c.asserted),
        "checks": [asdict(c) for c in checks],
    }
