# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled shooting kernels; typed port of ``_kernels_py``."""
from libc.math cimport exp, expm1, log, sqrt, tanh, pow, fabs, INFINITY
import numpy as np

cdef enum:
    S_UNDERSHOOT = 0
    S_OVERSHOOT = 1
    S_CONVERGED = 2
    S_XCAP = 3
    S_STEP_UNDERFLOW = 4

UNDERSHOOT = S_UNDERSHOOT
OVERSHOOT = S_OVERSHOOT
CONVERGED = S_CONVERGED
XCAP = S_XCAP
STEP_UNDERFLOW = S_STEP_UNDERFLOW

BACKEND = "cython"

cdef double _LN2 = log(2.0)

cdef double _C2 = 1.0 / 5, _C3 = 3.0 / 10, _C4 = 4.0 / 5, _C5 = 8.0 / 9
cdef double _A21 = 1.0 / 5
cdef double _A31 = 3.0 / 40, _A32 = 9.0 / 40
cdef double _A41 = 44.0 / 45, _A42 = -56.0 / 15, _A43 = 32.0 / 9
cdef double _A51 = 19372.0 / 6561, _A52 = -25360.0 / 2187, _A53 = 64448.0 / 6561, _A54 = -212.0 / 729
cdef double _A61 = 9017.0 / 3168, _A62 = -355.0 / 33, _A63 = 46732.0 / 5247, _A64 = 49.0 / 176, _A65 = -5103.0 / 18656
cdef double _B1 = 35.0 / 384, _B3 = 500.0 / 1113, _B4 = 125.0 / 192, _B5 = -2187.0 / 6784, _B6 = 11.0 / 84
cdef double _E1 = -71.0 / 57600, _E3 = 71.0 / 16695, _E4 = -71.0 / 1920, _E5 = 17253.0 / 339200, _E6 = -22.0 / 525, _E7 = 1.0 / 40


cdef class Model:
    cdef double[::1] v_shift
    cdef double[::1] V_shift
    cdef public int r
    cdef public double lam, Vmax, cminus1
    cdef double[::1] cvals
    cdef double[::1] cmult
    cdef int nv, nV, nc

    def __init__(self, v_shift, V_shift, r, lam, Vmax, cminus1, cvals, cmult):
        self.v_shift = np.ascontiguousarray(v_shift, dtype=np.float64)
        self.V_shift = np.ascontiguousarray(V_shift, dtype=np.float64)
        self.nv = self.v_shift.shape[0]
        self.nV = self.V_shift.shape[0]
        self.r = int(r)
        self.lam = float(lam)
        self.Vmax = float(Vmax)
        self.cminus1 = float(cminus1)
        self.cvals = np.ascontiguousarray(cvals, dtype=np.float64)
        self.cmult = np.ascontiguousarray(cmult, dtype=np.float64)
        self.nc = self.cvals.shape[0]


cdef inline double _horner(double[::1] a, int n, double x) noexcept nogil:
    cdef double acc = 0.0
    cdef int i
    for i in range(n - 1, -1, -1):
        acc = acc * x + a[i]
    return acc


cdef double _vinv(Model m, double q, double guess) noexcept nogil:
    cdef double lo, hi, p, f, d, pn
    cdef int it
    if q <= 0.0:
        return 0.0
    if q >= m.Vmax:
        if q == m.Vmax:
            return m.lam
        return m.cminus1 * pow(q, 1.0 / (m.r + 1))
    lo = 0.0
    hi = m.lam
    if 0.0 < guess < hi:
        p = guess
    else:
        p = pow(q / m.V_shift[0], 1.0 / (m.r + 1))
        if p >= hi:
            p = 0.5 * hi
    for it in range(200):
        f = pow(p, m.r + 1) * _horner(m.V_shift, m.nV, p) - q
        if f == 0.0:
            return p
        if f > 0.0:
            hi = p
        else:
            lo = p
        d = pow(p, m.r) * _horner(m.v_shift, m.nv, p)
        if d > 0.0:
            pn = p - f / d
        else:
            pn = 0.5 * (lo + hi)
        if not (lo < pn < hi):
            pn = 0.5 * (lo + hi)
        if fabs(pn - p) <= 1e-15 * pn or hi - lo <= 4e-16 * hi:
            return pn
        p = pn
    return p


cdef double _log_j(Model m, double x) noexcept nogil:
    cdef double acc = 0.0, y
    cdef int i
    for i in range(m.nc):
        y = m.cvals[i] * x
        acc += m.cmult[i] * (y + log(-expm1(-2.0 * y)) - _LN2)
    return acc


cdef double _dj(Model m, double x) noexcept nogil:
    cdef double acc = 0.0
    cdef int i
    for i in range(m.nc):
        acc -= m.cmult[i] * m.cvals[i] / tanh(m.cvals[i] * x)
    return acc


cdef inline double _rhs_w(Model m, double c, double x, double U) noexcept nogil:
    if x <= 0.0:
        return 0.0
    return exp(-2.0 * (c + U) + _log_j(m, x))


cdef struct StepOut:
    double dU, dw, eU, ew, k7U, k7w


cdef StepOut _step(Model m, double c, double x, double U, double w,
                   double k1U, double k1w, double p, double h) noexcept nogil:
    cdef double y, z, k2U, k2w, k3U, k3w, k4U, k4w, k5U, k5w, k6U, k6w
    cdef StepOut o
    y = U + h * (_A21 * k1U)
    z = w + h * (_A21 * k1w)
    k2U = _vinv(m, z, p)
    k2w = _rhs_w(m, c, x + _C2 * h, y)
    y = U + h * (_A31 * k1U + _A32 * k2U)
    z = w + h * (_A31 * k1w + _A32 * k2w)
    k3U = _vinv(m, z, k2U)
    k3w = _rhs_w(m, c, x + _C3 * h, y)
    y = U + h * (_A41 * k1U + _A42 * k2U + _A43 * k3U)
    z = w + h * (_A41 * k1w + _A42 * k2w + _A43 * k3w)
    k4U = _vinv(m, z, k3U)
    k4w = _rhs_w(m, c, x + _C4 * h, y)
    y = U + h * (_A51 * k1U + _A52 * k2U + _A53 * k3U + _A54 * k4U)
    z = w + h * (_A51 * k1w + _A52 * k2w + _A53 * k3w + _A54 * k4w)
    k5U = _vinv(m, z, k4U)
    k5w = _rhs_w(m, c, x + _C5 * h, y)
    y = U + h * (_A61 * k1U + _A62 * k2U + _A63 * k3U + _A64 * k4U + _A65 * k5U)
    z = w + h * (_A61 * k1w + _A62 * k2w + _A63 * k3w + _A64 * k4w + _A65 * k5w)
    k6U = _vinv(m, z, k5U)
    k6w = _rhs_w(m, c, x + h, y)
    o.dU = h * (_B1 * k1U + _B3 * k3U + _B4 * k4U + _B5 * k5U + _B6 * k6U)
    o.dw = h * (_B1 * k1w + _B3 * k3w + _B4 * k4w + _B5 * k5w + _B6 * k6w)
    o.k7U = _vinv(m, w + o.dw, k6U)
    o.k7w = _rhs_w(m, c, x + h, U + o.dU)
    o.eU = h * (_E1 * k1U + _E3 * k3U + _E4 * k4U + _E5 * k5U + _E6 * k6U + _E7 * o.k7U)
    o.ew = h * (_E1 * k1w + _E3 * k3w + _E4 * k4w + _E5 * k5w + _E6 * k6w + _E7 * o.k7w)
    return o


cdef inline double _errnorm(double U, double w, StepOut o, double rtol,
                            double atol_U, double atol_w) noexcept nogil:
    cdef double sU = atol_U + rtol * max(fabs(U), fabs(U + o.dU))
    cdef double sw = atol_w + rtol * max(fabs(w), fabs(w + o.dw))
    return sqrt(0.5 * ((o.eU / sU) ** 2 + (o.ew / sw) ** 2))


def horner(coeffs, double x):
    cdef double acc = 0.0
    for a in reversed(list(coeffs)):
        acc = acc * x + a
    return acc


def vinv(Model m, double q, double guess=-1.0):
    return _vinv(m, q, guess)


def log_j(Model m, double x):
    return _log_j(m, x)


def dj(Model m, double x):
    return _dj(m, x)


def shoot(Model m, double c, double W, double rtol, double atol_U, double atol_w,
          double tau, double x_cap, double h0, double h_max):
    cdef double x = 0.0, U = 0.0, w = 0.0, cU = 0.0, cw = 0.0
    cdef double k1U = 0.0, k1w = 0.0, p = 0.0, h = h0, tb = INFINITY
    cdef double err, inc, t, nup
    cdef long nsteps = 0, nrej = 0
    cdef int status = -1
    cdef StepOut o
    with nogil:
        while True:
            if x >= x_cap:
                status = S_XCAP
                break
            if h > h_max:
                h = h_max
            o = _step(m, c, x, U, w, k1U, k1w, p, h)
            err = _errnorm(U, w, o, rtol, atol_U, atol_w)
            if err <= 1.0:
                inc = o.dU - cU
                t = U + inc
                cU = (t - U) - inc
                U = t
                inc = o.dw - cw
                t = w + inc
                cw = (t - w) - inc
                w = t
                x = x + h
                k1U = o.k7U
                k1w = o.k7w
                p = o.k7U
                nsteps += 1
                if w > W:
                    status = S_OVERSHOOT
                    break
                nup = 2.0 * p + _dj(m, x)
                if nup > 0.0:
                    tb = k1w / nup
                    if w + tb < W:
                        status = S_UNDERSHOOT
                        break
                    if tb <= tau * W:
                        status = S_CONVERGED
                        break
                if err == 0.0:
                    h *= 5.0
                else:
                    h *= min(5.0, 0.9 * pow(err, -0.2))
            else:
                nrej += 1
                h *= max(0.2, 0.9 * pow(err, -0.2))
                if h < 1e-14 * (1.0 + x):
                    status = S_STEP_UNDERFLOW
                    break
    return (status, x, U, w, tb, p, nsteps, nrej)


def integrate_grid(Model m, double c, double W, double h_grid, double rtol,
                   double atol_U, double atol_w, double tau, double x_cap, double h0):
    cdef Py_ssize_t cap = 4096, n = 1
    cdef double[::1] xs = np.empty(cap)
    cdef double[::1] Us = np.empty(cap)
    cdef double[::1] ws = np.empty(cap)
    cdef double[::1] ps = np.empty(cap)
    cdef double x = 0.0, U = 0.0, w = 0.0, cU = 0.0, cw = 0.0
    cdef double k1U = 0.0, k1w = 0.0, p = 0.0, h = h0, hs, fac, err, inc, t, nup
    cdef double x_next = h_grid
    cdef long i = 1, nsteps = 0, nrej = 0
    cdef int status = -1
    cdef bint landing
    cdef StepOut o
    xs[0] = 0.0
    Us[0] = 0.0
    ws[0] = 0.0
    ps[0] = 0.0
    while True:
        hs = h
        landing = False
        if x + hs >= x_next:
            hs = x_next - x
            landing = True
        o = _step(m, c, x, U, w, k1U, k1w, p, hs)
        err = _errnorm(U, w, o, rtol, atol_U, atol_w)
        if err <= 1.0:
            inc = o.dU - cU
            t = U + inc
            cU = (t - U) - inc
            U = t
            inc = o.dw - cw
            t = w + inc
            cw = (t - w) - inc
            w = t
            k1U = o.k7U
            k1w = o.k7w
            p = o.k7U
            nsteps += 1
            if err == 0.0:
                fac = 5.0
            else:
                fac = min(5.0, 0.9 * pow(err, -0.2))
            if landing:
                x = x_next
                p = _vinv(m, w, p)
                if n == cap:
                    cap *= 2
                    xs = np.resize(np.asarray(xs), cap)
                    Us = np.resize(np.asarray(Us), cap)
                    ws = np.resize(np.asarray(ws), cap)
                    ps = np.resize(np.asarray(ps), cap)
                xs[n] = x
                Us[n] = U
                ws[n] = w
                ps[n] = p
                n += 1
                i += 1
                x_next = i * h_grid
                h = max(h, hs * fac)
                nup = 2.0 * p + _dj(m, x)
                if nup > 0.0 and k1w * x < tau * W:
                    status = S_CONVERGED
                    break
                if x >= x_cap:
                    status = S_XCAP
                    break
            else:
                x = x + hs
                h = hs * fac
        else:
            nrej += 1
            h = hs * max(0.2, 0.9 * pow(err, -0.2))
            if h < 1e-14 * (1.0 + x):
                status = S_STEP_UNDERFLOW
                break
    return (status, np.asarray(xs[:n]).copy(), np.asarray(Us[:n]).copy(),
            np.asarray(ws[:n]).copy(), np.asarray(ps[:n]).copy(), nsteps, nrej)
