"""Pure-Python shooting kernels.

This is the reference implementation of the hot loop.  ``_kernels.pyx`` is a
line-by-line typed port; both must return identical results up to rounding.

State of the integrator: ``U = u - u(0)`` and ``w = int_0^x exp(-nu)``.
The system is ``U' = V^{-1}(w)``, ``w' = exp(-2(c + U)) J(x)``, regular at 0.
"""
from math import exp, expm1, log, sqrt, tanh

UNDERSHOOT = 0
OVERSHOOT = 1
CONVERGED = 2
XCAP = 3
STEP_UNDERFLOW = 4

BACKEND = "python"

_LN2 = log(2.0)

# Dormand-Prince 5(4)
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    -71 / 57600, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40,
)


class Model:
    """Float data needed by the kernels.

    ``v_shift`` / ``V_shift`` are ascending coefficients of ``v(p)/p^r`` and
    ``V(p)/p^(r+1)``; ``cvals`` / ``cmult`` the distinct sinh rates and their
    multiplicities.
    """

    def __init__(self, v_shift, V_shift, r, lam, Vmax, cminus1, cvals, cmult):
        self.v_shift = [float(a) for a in v_shift]
        self.V_shift = [float(a) for a in V_shift]
        self.r = int(r)
        self.lam = float(lam)
        self.Vmax = float(Vmax)
        self.cminus1 = float(cminus1)
        self.cvals = [float(a) for a in cvals]
        self.cmult = [float(a) for a in cmult]


def horner(coeffs, x):
    acc = 0.0
    for a in reversed(coeffs):
        acc = acc * x + a
    return acc


def v_eval(m, p):
    return p ** m.r * horner(m.v_shift, p)


def V_eval(m, p):
    return p ** (m.r + 1) * horner(m.V_shift, p)


def vinv(m, q, guess=-1.0):
    """Inverse of V: safeguarded Newton on [0, lambda_ac].

    Above V(lambda_ac) the power-law extension ``C_-1 q^(1/(r+1))`` is used.
    """
    if q <= 0.0:
        return 0.0
    if q >= m.Vmax:
        if q == m.Vmax:
            return m.lam
        return m.cminus1 * q ** (1.0 / (m.r + 1))
    lo = 0.0
    hi = m.lam
    if 0.0 < guess < hi:
        p = guess
    else:
        p = (q / m.V_shift[0]) ** (1.0 / (m.r + 1))
        if p >= hi:
            p = 0.5 * hi
    for _ in range(200):
        f = p ** (m.r + 1) * horner(m.V_shift, p) - q
        if f == 0.0:
            return p
        if f > 0.0:
            hi = p
        else:
            lo = p
        d = p ** m.r * horner(m.v_shift, p)
        if d > 0.0:
            pn = p - f / d
        else:
            pn = 0.5 * (lo + hi)
        if not (lo < pn < hi):
            pn = 0.5 * (lo + hi)
        if abs(pn - p) <= 1e-15 * pn or hi - lo <= 4e-16 * hi:
            return pn
        p = pn
    return p


def log_j(m, x):
    """ln J(x) = sum mult * ln sinh(c x), stable for all x > 0."""
    acc = 0.0
    for cv, mu in zip(m.cvals, m.cmult):
        y = cv * x
        acc += mu * (y + log(-expm1(-2.0 * y)) - _LN2)
    return acc


def dj(m, x):
    """Derivative of j = -ln J."""
    acc = 0.0
    for cv, mu in zip(m.cvals, m.cmult):
        acc -= mu * cv / tanh(cv * x)
    return acc


def _rhs_w(m, c, x, U):
    if x <= 0.0:
        return 0.0
    return exp(-2.0 * (c + U) + log_j(m, x))


def _step(m, c, x, U, w, k1U, k1w, p, h):
    """One Dormand-Prince step; returns increments, error terms and the FSAL stage."""
    y = U + h * (_A21 * k1U)
    z = w + h * (_A21 * k1w)
    k2U = vinv(m, z, p)
    k2w = _rhs_w(m, c, x + _C2 * h, y)
    y = U + h * (_A31 * k1U + _A32 * k2U)
    z = w + h * (_A31 * k1w + _A32 * k2w)
    k3U = vinv(m, z, k2U)
    k3w = _rhs_w(m, c, x + _C3 * h, y)
    y = U + h * (_A41 * k1U + _A42 * k2U + _A43 * k3U)
    z = w + h * (_A41 * k1w + _A42 * k2w + _A43 * k3w)
    k4U = vinv(m, z, k3U)
    k4w = _rhs_w(m, c, x + _C4 * h, y)
    y = U + h * (_A51 * k1U + _A52 * k2U + _A53 * k3U + _A54 * k4U)
    z = w + h * (_A51 * k1w + _A52 * k2w + _A53 * k3w + _A54 * k4w)
    k5U = vinv(m, z, k4U)
    k5w = _rhs_w(m, c, x + _C5 * h, y)
    y = U + h * (_A61 * k1U + _A62 * k2U + _A63 * k3U + _A64 * k4U + _A65 * k5U)
    z = w + h * (_A61 * k1w + _A62 * k2w + _A63 * k3w + _A64 * k4w + _A65 * k5w)
    k6U = vinv(m, z, k5U)
    k6w = _rhs_w(m, c, x + h, y)
    dU = h * (_B1 * k1U + _B3 * k3U + _B4 * k4U + _B5 * k5U + _B6 * k6U)
    dw = h * (_B1 * k1w + _B3 * k3w + _B4 * k4w + _B5 * k5w + _B6 * k6w)
    k7U = vinv(m, w + dw, k6U)
    k7w = _rhs_w(m, c, x + h, U + dU)
    eU = h * (_E1 * k1U + _E3 * k3U + _E4 * k4U + _E5 * k5U + _E6 * k6U + _E7 * k7U)
    ew = h * (_E1 * k1w + _E3 * k3w + _E4 * k4w + _E5 * k5w + _E6 * k6w + _E7 * k7w)
    return dU, dw, eU, ew, k7U, k7w


def _errnorm(U, w, dU, dw, eU, ew, rtol, atol_U, atol_w):
    sU = atol_U + rtol * max(abs(U), abs(U + dU))
    sw = atol_w + rtol * max(abs(w), abs(w + dw))
    return sqrt(0.5 * ((eU / sU) ** 2 + (ew / sw) ** 2))


def shoot(m, c, W, rtol, atol_U, atol_w, tau, x_cap, h0, h_max):
    """Integrate one trial until it can be classified.

    Returns ``(status, x, U, w, tail_bound, p, nsteps, nrej)``.  The tail
    bound ``exp(-nu)/nu'`` is valid once ``nu' > 0`` because nu is convex.
    """
    x = 0.0
    U = 0.0
    w = 0.0
    cU = 0.0
    cw = 0.0
    k1U = 0.0
    k1w = 0.0
    p = 0.0
    h = h0
    nsteps = 0
    nrej = 0
    tb = float("inf")
    while True:
        if x >= x_cap:
            return (XCAP, x, U, w, tb, p, nsteps, nrej)
        if h > h_max:
            h = h_max
        dU, dw, eU, ew, k7U, k7w = _step(m, c, x, U, w, k1U, k1w, p, h)
        err = _errnorm(U, w, dU, dw, eU, ew, rtol, atol_U, atol_w)
        if err <= 1.0:
            inc = dU - cU
            t = U + inc
            cU = (t - U) - inc
            U = t
            inc = dw - cw
            t = w + inc
            cw = (t - w) - inc
            w = t
            x = x + h
            k1U = k7U
            k1w = k7w
            p = k7U
            nsteps += 1
            if w > W:
                return (OVERSHOOT, x, U, w, tb, p, nsteps, nrej)
            nup = 2.0 * p + dj(m, x)
            if nup > 0.0:
                tb = k1w / nup
                if w + tb < W:
                    return (UNDERSHOOT, x, U, w, tb, p, nsteps, nrej)
                if tb <= tau * W:
                    return (CONVERGED, x, U, w, tb, p, nsteps, nrej)
            if err == 0.0:
                h *= 5.0
            else:
                h *= min(5.0, 0.9 * err ** -0.2)
        else:
            nrej += 1
            h *= max(0.2, 0.9 * err ** -0.2)
            if h < 1e-14 * (1.0 + x):
                return (STEP_UNDERFLOW, x, U, w, tb, p, nsteps, nrej)


def integrate_grid(m, c, W, h_grid, rtol, atol_U, atol_w, tau, x_cap, h0):
    """Integrate on the uniform grid ``i * h_grid`` until the tail is negligible.

    Stops at the first grid point with ``nu' > 0`` and ``w' < tau * W / x``.
    Returns ``(status, xs, Us, ws, ps, nsteps, nrej)``; status is CONVERGED,
    XCAP or STEP_UNDERFLOW.
    """
    xs = [0.0]
    Us = [0.0]
    ws = [0.0]
    ps = [0.0]
    x = 0.0
    U = 0.0
    w = 0.0
    cU = 0.0
    cw = 0.0
    k1U = 0.0
    k1w = 0.0
    p = 0.0
    h = h0
    nsteps = 0
    nrej = 0
    i = 1
    x_next = h_grid
    while True:
        hs = h
        landing = False
        if x + hs >= x_next:
            hs = x_next - x
            landing = True
        dU, dw, eU, ew, k7U, k7w = _step(m, c, x, U, w, k1U, k1w, p, hs)
        err = _errnorm(U, w, dU, dw, eU, ew, rtol, atol_U, atol_w)
        if err <= 1.0:
            inc = dU - cU
            t = U + inc
            cU = (t - U) - inc
            U = t
            inc = dw - cw
            t = w + inc
            cw = (t - w) - inc
            w = t
            k1U = k7U
            k1w = k7w
            p = k7U
            nsteps += 1
            if err == 0.0:
                fac = 5.0
            else:
                fac = min(5.0, 0.9 * err ** -0.2)
            if landing:
                x = x_next
                p = vinv(m, w, p)
                xs.append(x)
                Us.append(U)
                ws.append(w)
                ps.append(p)
                i += 1
                x_next = i * h_grid
                h = max(h, hs * fac)
                nup = 2.0 * p + dj(m, x)
                if nup > 0.0 and k1w * x < tau * W:
                    return (CONVERGED, xs, Us, ws, ps, nsteps, nrej)
                if x >= x_cap:
                    return (XCAP, xs, Us, ws, ps, nsteps, nrej)
            else:
                x = x + hs
                h = hs * fac
        else:
            nrej += 1
            h = hs * max(0.2, 0.9 * err ** -0.2)
            if h < 1e-14 * (1.0 + x):
                return (STEP_UNDERFLOW, xs, Us, ws, ps, nsteps, nrej)
