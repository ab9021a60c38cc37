"""Pure-Python implementations of the hot kernels.

Mirrors ``_ckernels.pyx`` operation for operation so both backends agree to
round-off. Used when the compiled extension is unavailable or disabled.
"""
from __future__ import annotations

import math

import numpy as np

OK, COLLAPSE, UNDERFLOW, NONFINITE = 0, 1, 2, 3

# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40

SAFETY, FAC_MIN, FAC_MAX = 0.9, 0.2, 10.0
MAX_STEPS = 1_000_000


class _Collapse(Exception):
    pass


def poly_rhs(coeffs, mass, hbar, nu, corrected):
    """Moment right-hand side for a polynomial potential, as ``f(t, y)``."""
    coeffs = [float(c) for c in coeffs][::-1]
    inv_m = 1.0 / mass
    qc = hbar * hbar / (4.0 * mass * mass)

    def f(t, y):
        q, qd, a, ad, _ = y
        if not a > 0.0:
            raise _Collapse
        v = d1 = d2 = 0.0
        for c in coeffs:
            d2 = d2 * q + 2.0 * d1
            d1 = d1 * q + v
            v = v * q + c
        w = a * a if corrected else 1.0
        g = ad / a - 0.5 * nu
        return [
            qd,
            -nu * qd - d1 * inv_m,
            ad,
            -a * (d2 * inv_m - 0.25 * nu * nu) + qc / (a * a * a),
            (0.5 * mass * qd * qd + 0.5 * nu * mass * g * w - v - 0.25 * hbar * hbar / (mass * a * a)) / hbar,
        ]

    return f


def _rms(vals):
    s = 0.0
    for v in vals:
        s += v * v
    return math.sqrt(s / len(vals))


def _initial_step(f, t, y, f0, rtol, atol, span):
    n = len(y)
    sc = [atol + rtol * abs(y[i]) for i in range(n)]
    d0 = _rms([y[i] / sc[i] for i in range(n)])
    d1 = _rms([f0[i] / sc[i] for i in range(n)])
    h0 = 0.01 * d0 / d1 if (d0 > 1e-5 and d1 > 1e-5) else 1e-6
    h0 = min(h0, span)
    y1 = [y[i] + h0 * f0[i] for i in range(n)]
    f1 = f(t + h0, y1)
    d2 = _rms([(f1[i] - f0[i]) / sc[i] for i in range(n)]) / h0
    dm = max(d1, d2)
    h1 = (0.01 / dm) ** 0.2 if dm > 1e-15 else max(1e-6, h0 * 1e-3)
    return min(100.0 * h0, h1, span)


def dopri5(f, y0, times, rtol, atol):
    """Integrate ``y' = f(t, y)`` and report states exactly at ``times``.

    Returns ``(states, status, n_accepted, n_rejected, max_error)`` where
    ``states`` has one row per requested time (rows after a failure are NaN).
    """
    n = len(y0)
    times = [float(t) for t in times]
    out = np.full((len(times), n), np.nan)
    y = [float(v) for v in y0]
    t = times[0] if times else 0.0
    n_acc = n_rej = 0
    max_err = 0.0
    if not times:
        return out, OK, 0, 0, 0.0
    out[0] = y
    if len(times) == 1:
        return out, OK, 0, 0, 0.0
    try:
        k1 = f(t, y)
    except _Collapse:
        return out, COLLAPSE, 0, 0, 0.0
    try:
        h = _initial_step(f, t, y, k1, rtol, atol, times[-1] - times[0])
    except _Collapse:
        return out, COLLAPSE, 0, 0, 0.0
    last_fail = OK
    for idx in range(1, len(times)):
        target = times[idx]
        while t < target:
            if n_acc + n_rej >= MAX_STEPS:
                return out, UNDERFLOW, n_acc, n_rej, max_err
            hs = h
            landing = t + hs >= target - 1e-14 * max(1.0, abs(target))
            if landing:
                hs = target - t
            if hs < 1e-14 * max(1.0, abs(t)):
                return out, (last_fail or UNDERFLOW), n_acc, n_rej, max_err
            try:
                yt = [y[i] + hs * A21 * k1[i] for i in range(n)]
                k2 = f(t + C2 * hs, yt)
                yt = [y[i] + hs * (A31 * k1[i] + A32 * k2[i]) for i in range(n)]
                k3 = f(t + C3 * hs, yt)
                yt = [y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]) for i in range(n)]
                k4 = f(t + C4 * hs, yt)
                yt = [y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]) for i in range(n)]
                k5 = f(t + C5 * hs, yt)
                yt = [y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
                      for i in range(n)]
                k6 = f(t + hs, yt)
                yn = [y[i] + hs * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
                      for i in range(n)]
                k7 = f(t + hs, yn)
            except _Collapse:
                last_fail = COLLAPSE
                h = 0.25 * hs
                n_rej += 1
                continue
            s = 0.0
            for i in range(n):
                e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
                sc = atol + rtol * max(abs(y[i]), abs(yn[i]))
                s += (e / sc) ** 2
            err = math.sqrt(s / n)
            if not math.isfinite(err):
                last_fail = NONFINITE
                h = 0.25 * hs
                n_rej += 1
                continue
            if err <= 1.0:
                fac = FAC_MAX if err == 0.0 else min(FAC_MAX, max(FAC_MIN, SAFETY * err ** -0.2))
                t = target if landing else t + hs
                y = yn
                k1 = k7
                n_acc += 1
                max_err = max(max_err, err)
                last_fail = OK
                # a clamped landing step should not shrink the next proposal
                h = max(h, hs * fac) if landing else hs * fac
            else:
                n_rej += 1
                h = hs * max(FAC_MIN, SAFETY * err ** -0.2)
        out[idx] = y
    return out, OK, n_acc, n_rej, max_err


def integrate_poly(y0, times, coeffs, mass, hbar, nu, corrected, rtol, atol):
    f = poly_rhs(coeffs, mass, hbar, nu, corrected)
    return dopri5(f, y0, times, rtol, atol)


def integrate_poly_batch(y0s, times, coeffs, mass, hbar, nu, corrected, rtol, atol):
    """Integrate many initial states; returns ``(states, status)`` arrays."""
    y0s = np.asarray(y0s, dtype=float)
    f = poly_rhs(coeffs, mass, hbar, nu, corrected)
    states = np.full((y0s.shape[0], len(times), 5), np.nan)
    status = np.zeros(y0s.shape[0], dtype=np.int64)
    for b in range(y0s.shape[0]):
        st, code, *_ = dopri5(f, y0s[b], times, rtol, atol)
        states[b] = st
        status[b] = code
    return states, status


def assemble_quadratic(x, x0, u, w, centered, vlo, vhi, coef):
    """Velocity quadrature of the kernel integrand for affine trajectories.

    ``coef`` packs (q_c, q_x, q_v, p_c, p_x, p_v, s_c, s_x, s_v, s_xx, s_xv,
    s_vv, alpha, beta, m/hbar, prefactor, half_width). Centered windows put
    the nodes at ``v_stat(x, x0) + half_width * u``; otherwise the fixed
    window ``[vlo, vhi]`` is used for every pair.
    """
    (qc, qx, qv, pc, px, pv, sc, sx, sv, sxx, sxv, svv, alpha, beta, k, pref, hw) = [float(c) for c in coef]
    x = np.asarray(x, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    out = np.empty((x.size, x0.size), dtype=complex)
    quad = complex(-beta, alpha)
    scale = hw if centered else 0.5 * (vhi - vlo)
    chunk = max(1, (1 << 19) // max(1, u.size))
    for lo in range(0, x0.size, chunk):
        X = x0[lo:lo + chunk, None]
        for i, xi in enumerate(x):
            if centered:
                V = (xi - qc - qx * X) / qv + hw * u
            else:
                V = np.broadcast_to(0.5 * (vhi + vlo) + 0.5 * (vhi - vlo) * u, (X.shape[0], u.size))
            d = xi - (qc + qx * X + qv * V)
            p = pc + px * X + pv * V
            S = sc + sx * X + sv * V + sxx * X * X + sxv * X * V + svv * V * V
            out[i, lo:lo + chunk] = pref * scale * (np.exp(quad * d * d + 1j * (k * p * d + S)) @ w)
    return out
