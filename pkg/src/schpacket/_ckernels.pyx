# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: DOPRI5 moment integration and kernel quadrature.

Same algorithms as ``_fallback.py``; see there for argument conventions.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, pow, exp, cos, sin, isfinite

cnp.import_array()

DEF OK = 0
DEF COLLAPSE = 1
DEF UNDERFLOW = 2
DEF NONFINITE = 3
DEF MAX_STEPS = 1000000

cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200
cdef double E6 = 22.0 / 525, E7 = -1.0 / 40
cdef double SAFETY = 0.9, FAC_MIN = 0.2, FAC_MAX = 10.0


cdef struct Model:
    double *c          # coefficients, lowest order first
    int nc
    double mass, hbar, nu
    int corrected


cdef inline int rhs(Model *M, double *y, double *out) noexcept nogil:
    cdef double q = y[0], qd = y[1], a = y[2], ad = y[3]
    cdef double v = 0.0, d1 = 0.0, d2 = 0.0, w, g
    cdef int i
    if not a > 0.0:
        return COLLAPSE
    for i in range(M.nc - 1, -1, -1):
        d2 = d2 * q + 2.0 * d1
        d1 = d1 * q + v
        v = v * q + M.c[i]
    w = a * a if M.corrected else 1.0
    g = ad / a - 0.5 * M.nu
    out[0] = qd
    out[1] = -M.nu * qd - d1 * (1.0 / M.mass)
    out[2] = ad
    out[3] = -a * (d2 * (1.0 / M.mass) - 0.25 * M.nu * M.nu) + M.hbar * M.hbar / (4.0 * M.mass * M.mass) / (a * a * a)
    out[4] = (0.5 * M.mass * qd * qd + 0.5 * M.nu * M.mass * g * w - v
              - 0.25 * M.hbar * M.hbar / (M.mass * a * a)) / M.hbar
    return OK


cdef inline double rms5(double *v) noexcept nogil:
    cdef double s = 0.0
    cdef int i
    for i in range(5):
        s += v[i] * v[i]
    return sqrt(s / 5.0)


cdef int dopri5(Model *M, double *y0, double *times, int nt, double rtol, double atol,
                double *out, long *n_acc_out, long *n_rej_out, double *max_err_out) noexcept nogil:
    cdef double y[5]
    cdef double yt[5]
    cdef double yn[5]
    cdef double k1[5]
    cdef double k2[5]
    cdef double k3[5]
    cdef double k4[5]
    cdef double k5[5]
    cdef double k6[5]
    cdef double k7[5]
    cdef double tmp[5]
    cdef double t, h, hs, target, err, s, e, sc, fac, d0, d1, d2, dm, h0, h1, span
    cdef int i, idx, landing, code, last_fail = OK
    cdef long n_acc = 0, n_rej = 0
    cdef double max_err = 0.0
    n_acc_out[0] = 0
    n_rej_out[0] = 0
    max_err_out[0] = 0.0
    for i in range(nt * 5):
        out[i] = 0.0 / 0.0
    if nt == 0:
        return OK
    for i in range(5):
        y[i] = y0[i]
        out[i] = y0[i]
    if nt == 1:
        return OK
    t = times[0]
    if rhs(M, y, k1) != OK:
        return COLLAPSE
    # initial step heuristic
    span = times[nt - 1] - times[0]
    for i in range(5):
        sc = atol + rtol * fabs(y[i])
        yt[i] = y[i] / sc
        tmp[i] = k1[i] / sc
    d0 = rms5(yt)
    d1 = rms5(tmp)
    h0 = 0.01 * d0 / d1 if (d0 > 1e-5 and d1 > 1e-5) else 1e-6
    if h0 > span:
        h0 = span
    for i in range(5):
        yt[i] = y[i] + h0 * k1[i]
    if rhs(M, yt, k2) != OK:
        return COLLAPSE
    for i in range(5):
        tmp[i] = (k2[i] - k1[i]) / (atol + rtol * fabs(y[i]))
    d2 = rms5(tmp) / h0
    dm = d1 if d1 > d2 else d2
    h1 = pow(0.01 / dm, 0.2) if dm > 1e-15 else (1e-6 if 1e-6 > h0 * 1e-3 else h0 * 1e-3)
    h = 100.0 * h0
    if h1 < h:
        h = h1
    if span < h:
        h = span

    for idx in range(1, nt):
        target = times[idx]
        while t < target:
            if n_acc + n_rej >= MAX_STEPS:
                n_acc_out[0] = n_acc
                n_rej_out[0] = n_rej
                max_err_out[0] = max_err
                return UNDERFLOW
            hs = h
            landing = t + hs >= target - 1e-14 * (fabs(target) if fabs(target) > 1.0 else 1.0)
            if landing:
                hs = target - t
            if hs < 1e-14 * (fabs(t) if fabs(t) > 1.0 else 1.0):
                n_acc_out[0] = n_acc
                n_rej_out[0] = n_rej
                max_err_out[0] = max_err
                return last_fail if last_fail != OK else UNDERFLOW
            code = OK
            for i in range(5):
                yt[i] = y[i] + hs * A21 * k1[i]
            code = rhs(M, yt, k2)
            if code == OK:
                for i in range(5):
                    yt[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i])
                code = rhs(M, yt, k3)
            if code == OK:
                for i in range(5):
                    yt[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
                code = rhs(M, yt, k4)
            if code == OK:
                for i in range(5):
                    yt[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
                code = rhs(M, yt, k5)
            if code == OK:
                for i in range(5):
                    yt[i] = y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
                code = rhs(M, yt, k6)
            if code == OK:
                for i in range(5):
                    yn[i] = y[i] + hs * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
                code = rhs(M, yn, k7)
            if code != OK:
                last_fail = COLLAPSE
                h = 0.25 * hs
                n_rej += 1
                continue
            s = 0.0
            for i in range(5):
                e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
                sc = atol + rtol * (fabs(y[i]) if fabs(y[i]) > fabs(yn[i]) else fabs(yn[i]))
                s += (e / sc) * (e / sc)
            err = sqrt(s / 5.0)
            if not isfinite(err):
                last_fail = NONFINITE
                h = 0.25 * hs
                n_rej += 1
                continue
            if err <= 1.0:
                if err == 0.0:
                    fac = FAC_MAX
                else:
                    fac = SAFETY * pow(err, -0.2)
                    if fac < FAC_MIN:
                        fac = FAC_MIN
                    if fac > FAC_MAX:
                        fac = FAC_MAX
                t = target if landing else t + hs
                for i in range(5):
                    y[i] = yn[i]
                    k1[i] = k7[i]
                n_acc += 1
                if err > max_err:
                    max_err = err
                last_fail = OK
                if landing:
                    if hs * fac > h:
                        h = hs * fac
                else:
                    h = hs * fac
            else:
                n_rej += 1
                fac = SAFETY * pow(err, -0.2)
                h = hs * (fac if fac > FAC_MIN else FAC_MIN)
        for i in range(5):
            out[idx * 5 + i] = y[i]
    n_acc_out[0] = n_acc
    n_rej_out[0] = n_rej
    max_err_out[0] = max_err
    return OK


def integrate_poly(y0, times, coeffs, double mass, double hbar, double nu, bint corrected,
                   double rtol, double atol):
    cdef cnp.ndarray[double, ndim=1] cy0 = np.ascontiguousarray(y0, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] ct = np.ascontiguousarray(times, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] cc = np.ascontiguousarray(coeffs, dtype=np.float64)
    if cc.shape[0] == 0:
        cc = np.zeros(1)
    cdef int nt = ct.shape[0]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((nt, 5))
    cdef Model M
    cdef long n_acc, n_rej
    cdef double max_err
    cdef int code
    M.c = &cc[0]
    M.nc = cc.shape[0]
    M.mass = mass
    M.hbar = hbar
    M.nu = nu
    M.corrected = corrected
    with nogil:
        code = dopri5(&M, &cy0[0], &ct[0] if nt > 0 else NULL, nt, rtol, atol,
                      &out[0, 0] if nt > 0 else NULL, &n_acc, &n_rej, &max_err)
    return out, code, n_acc, n_rej, max_err


def integrate_poly_batch(y0s, times, coeffs, double mass, double hbar, double nu, bint corrected,
                         double rtol, double atol):
    cdef cnp.ndarray[double, ndim=2] cy0 = np.ascontiguousarray(y0s, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] ct = np.ascontiguousarray(times, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] cc = np.ascontiguousarray(coeffs, dtype=np.float64)
    if cc.shape[0] == 0:
        cc = np.zeros(1)
    cdef Py_ssize_t nb = cy0.shape[0], b
    cdef int nt = ct.shape[0]
    cdef cnp.ndarray[double, ndim=3] out = np.empty((nb, nt, 5))
    cdef cnp.ndarray[cnp.int64_t, ndim=1] status = np.zeros(nb, dtype=np.int64)
    cdef Model M
    cdef long n_acc, n_rej
    cdef double max_err
    if nt == 0 or nb == 0:
        return out, status
    M.c = &cc[0]
    M.nc = cc.shape[0]
    M.mass = mass
    M.hbar = hbar
    M.nu = nu
    M.corrected = corrected
    with nogil:
        for b in range(nb):
            status[b] = dopri5(&M, &cy0[b, 0], &ct[0], nt, rtol, atol, &out[b, 0, 0],
                               &n_acc, &n_rej, &max_err)
    return out, status


def assemble_quadratic(x, x0, u, w, bint centered, double vlo, double vhi, coef):
    cdef cnp.ndarray[double, ndim=1] cx = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] cx0 = np.ascontiguousarray(x0, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] cu = np.ascontiguousarray(u, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] cw = np.ascontiguousarray(w, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] cf = np.ascontiguousarray(coef, dtype=np.float64)
    cdef Py_ssize_t nx = cx.shape[0], n0 = cx0.shape[0], nv = cu.shape[0], i, j, kk
    cdef cnp.ndarray[complex, ndim=2] out = np.empty((nx, n0), dtype=np.complex128)
    cdef double qc = cf[0], qx = cf[1], qv = cf[2], pc = cf[3], px = cf[4], pv = cf[5]
    cdef double sc = cf[6], sx = cf[7], sv = cf[8], sxx = cf[9], sxv = cf[10], svv = cf[11]
    cdef double alpha = cf[12], beta = cf[13], k = cf[14], pref = cf[15], hw = cf[16]
    cdef double xi, X, c, scale, V, d, p, S, mag, ph, re, im
    with nogil:
        for i in range(nx):
            xi = cx[i]
            for j in range(n0):
                X = cx0[j]
                if centered:
                    c = (xi - qc - qx * X) / qv
                    scale = hw
                else:
                    c = 0.5 * (vhi + vlo)
                    scale = 0.5 * (vhi - vlo)
                re = 0.0
                im = 0.0
                for kk in range(nv):
                    V = c + scale * cu[kk]
                    d = xi - (qc + qx * X + qv * V)
                    p = pc + px * X + pv * V
                    S = sc + sx * X + sv * V + sxx * X * X + sxv * X * V + svv * V * V
                    mag = cw[kk] * exp(-beta * d * d)
                    ph = alpha * d * d + k * p * d + S
                    re += mag * cos(ph)
                    im += mag * sin(ph)
                out[i, j] = pref * scale * (re + 1j * im)
    return out
