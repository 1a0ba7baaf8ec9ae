"""Pure-Python kernels: Weierstrass family via theta quotients, and an
adaptive Dormand-Prince propagator for the 2x2 transfer system.

The Cython module ``fingap._core._fast`` implements the same entry points
with identical algorithms; this module is the fallback and the reference
the extension is validated against.

Lattice parameter packing (``params`` argument, complex128 array):

    params = [omega1, omega2, eta1, eta2, q]

where ``q = exp(i*pi*omega2/omega1)``, ``eta1 = zeta(omega1)`` and
``eta2 = zeta(omega2)``.
"""

import cmath

import numpy as np

BACKEND_NAME = "python"

_TWO_PI = 2.0 * np.pi

# ---------------------------------------------------------------------------
# theta machinery
# ---------------------------------------------------------------------------


def theta1_family(v, q, nmax=64):
    """theta_1 and its first three v-derivatives at v (scalar or array).

    Series terms q^((n+1/2)^2) decay fast for |q| < 1; summation stops once
    the term bound drops below 1e-18 of the running scale.
    """
    v = np.asarray(v, dtype=complex)
    t = np.zeros_like(v)
    tp = np.zeros_like(v)
    tpp = np.zeros_like(v)
    tppp = np.zeros_like(v)
    qa = abs(q)
    # |sin((2n+1)v)| <= exp((2n+1)|Im v|); track the worst point
    im_max = float(np.max(np.abs(v.imag))) if v.size else 0.0
    scale = 0.0
    for n in range(nmax):
        m = 2 * n + 1
        qn = q ** ((n + 0.5) ** 2)
        s = np.sin(m * v)
        c = np.cos(m * v)
        sign = -1.0 if n % 2 else 1.0
        t += sign * qn * s
        tp += sign * qn * m * c
        tpp += -sign * qn * m * m * s
        tppp += -sign * qn * m * m * m * c
        bound = qa ** ((n + 0.5) ** 2) * np.exp(m * im_max) * m ** 3
        scale = max(scale, bound)
        if bound < 1e-18 * max(scale, 1.0):
            break
    return 2.0 * t, 2.0 * tp, 2.0 * tpp, 2.0 * tppp


def theta1_zero_derivs(q, nmax=64):
    """theta_1'(0) and theta_1'''(0)."""
    tp = 0.0 + 0.0j
    tppp = 0.0 + 0.0j
    for n in range(nmax):
        m = 2 * n + 1
        qn = q ** ((n + 0.5) ** 2)
        sign = -1.0 if n % 2 else 1.0
        tp += sign * qn * m
        tppp += -sign * qn * m ** 3
        if abs(qn) * m ** 3 < 1e-18:
            break
    return 2.0 * tp, 2.0 * tppp


def lattice_params(omega1, omega2):
    """Pack [omega1, omega2, eta1, eta2, q] for the kernel calls."""
    tau = omega2 / omega1
    if tau.imag <= 0:
        raise ValueError("Im(omega2/omega1) must be positive")
    q = cmath.exp(1j * cmath.pi * tau)
    tp0, tppp0 = theta1_zero_derivs(q)
    eta1 = -(cmath.pi ** 2) / (12.0 * omega1) * (tppp0 / tp0)
    eta2 = (eta1 * omega2 - 0.5j * cmath.pi) / omega1
    return np.array([omega1, omega2, eta1, eta2, q], dtype=complex)


def _reduce(z, params):
    """Reduce z modulo the period lattice to the centred fundamental cell.

    Returns (z0, m, n) with z = z0 + 2*m*omega1 + 2*n*omega2.
    """
    w1, w2 = params[0], params[1]
    det = w1.real * w2.imag - w1.imag * w2.real
    a = (z.real * w2.imag - z.imag * w2.real) / (2.0 * det)
    b = (z.imag * w1.real - z.real * w1.imag) / (2.0 * det)
    m = np.round(a)
    n = np.round(b)
    z0 = z - 2.0 * m * w1 - 2.0 * n * w2
    return z0, m, n


def wp_family(z, params):
    """(wp, wp', zeta, sigma) at z (scalar or array), lattice-reduced.

    sigma and zeta are unreduced back to the original argument through their
    quasi-periodicity; wp and wp' are elliptic so reduction is free.
    """
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    w1, eta1, eta2 = params[0], params[2], params[3]
    z0, m, n = _reduce(z, params)
    v = (np.pi / (2.0 * w1)) * z0
    q = params[4]
    t, tp, tpp, tppp = theta1_family(v, q)
    tp0, _ = theta1_zero_derivs(q)
    c = np.pi / (2.0 * w1)
    r1 = tp / t
    zeta0 = eta1 * z0 / w1 + c * r1
    wp = -eta1 / w1 - c * c * (tpp / t - r1 * r1)
    wpp = -c ** 3 * (tppp / t - 3.0 * (tpp / t) * r1 + 2.0 * r1 ** 3)
    sigma0 = (2.0 * w1 / np.pi) * np.exp(eta1 * z0 * z0 / (2.0 * w1)) * t / tp0
    # unreduce
    chi = 2.0 * m * eta1 + 2.0 * n * eta2
    zeta = zeta0 + chi
    sign = np.where((m + n + m * n) % 2 == 0, 1.0, -1.0)
    sigma = sigma0 * sign * np.exp(chi * (z0 + m * w1 + n * params[1]))
    if scalar:
        return complex(wp[0]), complex(wpp[0]), complex(zeta[0]), complex(sigma[0])
    return wp, wpp, zeta, sigma


def nearest_lattice_distance(z, params):
    """Distance from z to the nearest lattice point."""
    z = np.asarray(z, dtype=complex)
    z0, _, _ = _reduce(np.atleast_1d(z), params)
    w1, w2 = params[0], params[1]
    cands = [z0, z0 - 2 * w1, z0 + 2 * w1, z0 - 2 * w2, z0 + 2 * w2,
             z0 - 2 * w1 - 2 * w2, z0 + 2 * w1 + 2 * w2,
             z0 - 2 * w1 + 2 * w2, z0 + 2 * w1 - 2 * w2]
    d = np.min(np.abs(np.stack(cands)), axis=0)
    if np.asarray(z).ndim == 0:
        return float(d[0])
    return d


# ---------------------------------------------------------------------------
# potential evaluation
# ---------------------------------------------------------------------------

POT_FREE = 0
POT_WP = 1        # strength*wp(x + shift) + offset
POT_SINH = 2      # 2 c^2 / sinh(cx)^2 + offset
POT_SIN = 3       # 2 c^2 / sin(cx)^2  + offset
POT_INVSQ = 4     # strength / x^2 + offset
POT_CALL = 5      # python callable


def potential_value(x, code, strength, offset, shift, cpar, params, func):
    if code == POT_FREE:
        return offset + 0.0j
    if code == POT_WP:
        wp, _, _, _ = wp_family(x + shift, params)
        return strength * wp + offset
    if code == POT_SINH:
        s = cmath.sinh(cpar * x)
        return 2.0 * cpar * cpar / (s * s) + offset
    if code == POT_SIN:
        s = cmath.sin(cpar * x)
        return 2.0 * cpar * cpar / (s * s) + offset
    if code == POT_INVSQ:
        return strength / (x * x) + offset
    return complex(func(x))


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4) propagation of the transfer system
# ---------------------------------------------------------------------------

_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_E = (
    35 / 384 - 5179 / 57600,
    0.0,
    500 / 1113 - 7571 / 16695,
    125 / 192 - 393 / 640,
    -2187 / 6784 + 92097 / 339200,
    11 / 84 - 187 / 2100,
    -1 / 40,
)

STATUS_OK = 0
STATUS_UNDERFLOW = 1


def propagate_transfer(u, za, zb, code, strength, offset, shift, cpar,
                       params, func=None, rtol=1e-11, atol=1e-12,
                       y0=None, max_steps=2_000_000):
    """Propagate the fundamental matrix of psi'' = (U(x)-u) psi from za to zb
    along the straight segment, with embedded DP5(4) error control.

    Returns (Y, status) where Y is the 2x2 complex matrix mapping
    (psi(za), psi'(za)) -> (psi(zb), psi'(zb)) columns, i.e. columns are the
    solutions with initial data (1,0) and (0,1).
    """
    direction = zb - za
    length = abs(direction)
    if length == 0.0:
        return np.eye(2, dtype=complex), STATUS_OK
    e = direction / length

    # integrate in the complex variable x with complex steps h*e (the
    # right-hand side is analytic along the segment)
    def fx(x, y):
        U = potential_value(x, code, strength, offset, shift, cpar, params, func)
        g = U - u
        return np.array([y[1], g * y[0], y[3], g * y[2]], dtype=complex)

    if y0 is None:
        y = np.array([1, 0, 0, 1], dtype=complex)
    else:
        y = np.asarray(y0, dtype=complex).copy()
    x = za
    s_done = 0.0
    Uc = potential_value(za + 0.5 * direction, code, strength, offset, shift,
                         cpar, params, func)
    freq = max(abs(Uc - u) ** 0.5, 1.0 / length)
    h = min(0.1 / freq, 0.2 * length)
    k1 = fx(x, y)
    nsteps = 0
    K = [None] * 7
    while s_done < length - 1e-15 * length:
        if h < 1e-14 * length:
            return _as_matrix(y), STATUS_UNDERFLOW
        if s_done + h > length:
            h = length - s_done
        hc = e * h
        K[0] = k1
        ynew = y + hc * (_DP_A[1][0] * K[0])
        K[1] = fx(x + hc / 5, ynew)
        acc = _DP_A[2][0] * K[0] + _DP_A[2][1] * K[1]
        K[2] = fx(x + 0.3 * hc, y + hc * acc)
        acc = _DP_A[3][0] * K[0] + _DP_A[3][1] * K[1] + _DP_A[3][2] * K[2]
        K[3] = fx(x + 0.8 * hc, y + hc * acc)
        acc = (_DP_A[4][0] * K[0] + _DP_A[4][1] * K[1] + _DP_A[4][2] * K[2]
               + _DP_A[4][3] * K[3])
        K[4] = fx(x + (8 / 9) * hc, y + hc * acc)
        acc = (_DP_A[5][0] * K[0] + _DP_A[5][1] * K[1] + _DP_A[5][2] * K[2]
               + _DP_A[5][3] * K[3] + _DP_A[5][4] * K[4])
        K[5] = fx(x + hc, y + hc * acc)
        acc = (_DP_A[6][0] * K[0] + _DP_A[6][2] * K[2] + _DP_A[6][3] * K[3]
               + _DP_A[6][4] * K[4] + _DP_A[6][5] * K[5])
        y5 = y + hc * acc
        K[6] = fx(x + hc, y5)
        err_vec = hc * (_DP_E[0] * K[0] + _DP_E[2] * K[2] + _DP_E[3] * K[3]
                        + _DP_E[4] * K[4] + _DP_E[5] * K[5] + _DP_E[6] * K[6])
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
        err = float(np.max(np.abs(err_vec) / sc))
        if err <= 1.0:
            x = x + hc
            s_done += h
            y = y5
            k1 = K[6]
        else:
            k1 = K[0]
        fac = 0.9 * (max(err, 1e-10)) ** -0.2
        h *= min(5.0, max(0.2, fac))
        nsteps += 1
        if nsteps > max_steps:
            return _as_matrix(y), STATUS_UNDERFLOW
    return _as_matrix(y), STATUS_OK


def _as_matrix(y):
    return np.array([[y[0], y[2]], [y[1], y[3]]], dtype=complex)
