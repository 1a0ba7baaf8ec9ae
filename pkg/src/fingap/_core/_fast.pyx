# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels: scalar Weierstrass family via theta quotients and the
Dormand-Prince 5(4) transfer-matrix propagator.

Mirrors ``fingap._core.reference`` (same algorithms, same parameter packing);
the reference module is the fallback and the correctness baseline.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt, floor

cdef extern from "complex.h":
    double complex csin(double complex) nogil
    double complex ccos(double complex) nogil
    double complex cexp(double complex) nogil
    double complex cpow(double complex, double complex) nogil
    double cabs(double complex) nogil
    double creal(double complex) nogil
    double cimag(double complex) nogil

BACKEND_NAME = "cython"

DEF C_FREE = 0
DEF C_WP = 1
DEF C_SINH = 2
DEF C_SIN = 3
DEF C_INVSQ = 4
DEF C_CALL = 5

POT_FREE = C_FREE
POT_WP = C_WP
POT_SINH = C_SINH
POT_SIN = C_SIN
POT_INVSQ = C_INVSQ
POT_CALL = C_CALL

DEF NMAX = 64


cdef struct LatPars:
    double complex w1
    double complex w2
    double complex eta1
    double complex eta2
    double complex q


cdef inline LatPars unpack(double complex[:] params) noexcept nogil:
    cdef LatPars L
    L.w1 = params[0]
    L.w2 = params[1]
    L.eta1 = params[2]
    L.eta2 = params[3]
    L.q = params[4]
    return L


cdef int theta_family(double complex v, double complex q,
                      double complex* t, double complex* tp,
                      double complex* tpp, double complex* tppp) noexcept nogil:
    cdef double complex acc_t = 0, acc_tp = 0, acc_tpp = 0, acc_tppp = 0
    cdef double complex qn, s, c
    cdef double qa = cabs(q), bound, scale = 0.0
    cdef double im = fabs(cimag(v))
    cdef double expim, qpow
    cdef int n, m
    cdef double sign
    for n in range(NMAX):
        m = 2 * n + 1
        qn = cpow(q, (n + 0.5) * (n + 0.5))
        s = csin(m * v)
        c = ccos(m * v)
        sign = -1.0 if n % 2 else 1.0
        acc_t = acc_t + sign * qn * s
        acc_tp = acc_tp + sign * qn * m * c
        acc_tpp = acc_tpp - sign * qn * m * m * s
        acc_tppp = acc_tppp - sign * qn * m * m * m * c
        qpow = qa ** ((n + 0.5) * (n + 0.5))
        expim = m * im
        # exp(m*im) without overflow worry for the convergence test
        bound = qpow * m * m * m
        if expim < 600.0:
            bound = bound * (2.718281828459045 ** expim)
        else:
            bound = 1e300
        if bound > scale:
            scale = bound
        if bound < 1e-18 * (scale if scale > 1.0 else 1.0):
            break
    t[0] = 2.0 * acc_t
    tp[0] = 2.0 * acc_tp
    tpp[0] = 2.0 * acc_tpp
    tppp[0] = 2.0 * acc_tppp
    return 0


cdef int theta_zero(double complex q, double complex* tp0,
                    double complex* tppp0) noexcept nogil:
    cdef double complex acc_tp = 0, acc_tppp = 0, qn
    cdef int n, m
    cdef double sign
    for n in range(NMAX):
        m = 2 * n + 1
        qn = cpow(q, (n + 0.5) * (n + 0.5))
        sign = -1.0 if n % 2 else 1.0
        acc_tp = acc_tp + sign * qn * m
        acc_tppp = acc_tppp - sign * qn * m * m * m
        if cabs(qn) * m * m * m < 1e-18:
            break
    tp0[0] = 2.0 * acc_tp
    tppp0[0] = 2.0 * acc_tppp
    return 0


cdef int reduce_z(double complex z, LatPars L, double complex* z0,
                  double* mm, double* nn) noexcept nogil:
    cdef double det = creal(L.w1) * cimag(L.w2) - cimag(L.w1) * creal(L.w2)
    cdef double a = (creal(z) * cimag(L.w2) - cimag(z) * creal(L.w2)) / (2.0 * det)
    cdef double b = (cimag(z) * creal(L.w1) - creal(z) * cimag(L.w1)) / (2.0 * det)
    cdef double m = floor(a + 0.5)
    cdef double n = floor(b + 0.5)
    z0[0] = z - 2.0 * m * L.w1 - 2.0 * n * L.w2
    mm[0] = m
    nn[0] = n
    return 0


cdef int wp_family_c(double complex z, LatPars L, double complex* wp,
                     double complex* wpp, double complex* zeta,
                     double complex* sigma) noexcept nogil:
    cdef double complex z0
    cdef double m, n
    reduce_z(z, L, &z0, &m, &n)
    cdef double complex c = 3.141592653589793 / (2.0 * L.w1)
    cdef double complex v = c * z0
    cdef double complex t, tp, tpp, tppp, tp0, tppp0
    theta_family(v, L.q, &t, &tp, &tpp, &tppp)
    theta_zero(L.q, &tp0, &tppp0)
    cdef double complex r1 = tp / t
    zeta[0] = L.eta1 * z0 / L.w1 + c * r1
    wp[0] = -L.eta1 / L.w1 - c * c * (tpp / t - r1 * r1)
    wpp[0] = -c * c * c * (tppp / t - 3.0 * (tpp / t) * r1 + 2.0 * r1 * r1 * r1)
    sigma[0] = (2.0 * L.w1 / 3.141592653589793) \
        * cexp(L.eta1 * z0 * z0 / (2.0 * L.w1)) * t / tp0
    cdef double complex chi = 2.0 * m * L.eta1 + 2.0 * n * L.eta2
    zeta[0] = zeta[0] + chi
    cdef double sgn = 1.0
    cdef long mi = <long> m, ni = <long> n
    if (mi + ni + mi * ni) % 2 != 0:
        sgn = -1.0
    sigma[0] = sigma[0] * sgn * cexp(chi * (z0 + m * L.w1 + n * L.w2))
    return 0


def wp_family(z, params):
    """(wp, wp', zeta, sigma) at scalar z."""
    cdef double complex[:] p = np.ascontiguousarray(params, dtype=complex)
    cdef LatPars L = unpack(p)
    cdef double complex wp, wpp, zeta, sigma
    wp_family_c(z, L, &wp, &wpp, &zeta, &sigma)
    return wp, wpp, zeta, sigma


def lattice_params(omega1, omega2):
    """Pack [omega1, omega2, eta1, eta2, q]; matches the reference module."""
    from . import reference
    return reference.lattice_params(omega1, omega2)


def nearest_lattice_distance(z, params):
    from . import reference
    return reference.nearest_lattice_distance(z, params)


# ---------------------------------------------------------------------------
# potential + DP54 propagation
# ---------------------------------------------------------------------------


cdef inline double complex pot_value(double complex x, int code,
                                     double complex strength,
                                     double complex offset,
                                     double complex shift,
                                     double complex cpar,
                                     LatPars L) noexcept nogil:
    cdef double complex wp, wpp, zeta, sigma, s
    if code == C_FREE:
        return offset
    if code == C_WP:
        wp_family_c(x + shift, L, &wp, &wpp, &zeta, &sigma)
        return strength * wp + offset
    if code == C_SINH:
        s = csin(cpar * x * 1j) / 1j  # sinh via sin
        return 2.0 * cpar * cpar / (s * s) + offset
    if code == C_SIN:
        s = csin(cpar * x)
        return 2.0 * cpar * cpar / (s * s) + offset
    # C_INVSQ
    return strength / (x * x) + offset


STATUS_OK = 0
STATUS_UNDERFLOW = 1


def propagate_transfer(u, za, zb, code, strength, offset, shift, cpar,
                       params, func=None, rtol=1e-11, atol=1e-12,
                       y0=None, max_steps=2_000_000):
    """DP5(4) propagation of the fundamental system along [za, zb].

    Same contract as ``reference.propagate_transfer``.
    """
    cdef double complex[:] p = np.ascontiguousarray(params, dtype=complex)
    cdef LatPars L = unpack(p)
    cdef int icode = code
    cdef double complex uu = u, c_strength = strength, c_offset = offset
    cdef double complex c_shift = shift, c_cpar = cpar
    cdef double complex a = za, b = zb
    cdef double complex direction = b - a
    cdef double length = cabs(direction)
    if length == 0.0:
        return np.eye(2, dtype=complex), STATUS_OK
    cdef double complex e = direction / length
    cdef double complex y[4]
    cdef double complex k[7][4]
    cdef double complex ytmp[4]
    cdef double complex y5[4]
    cdef double complex errv
    cdef int i, j, stage
    if y0 is None:
        y[0] = 1; y[1] = 0; y[2] = 0; y[3] = 1
    else:
        for i in range(4):
            y[i] = y0[i]
    cdef bint use_call = (icode == POT_CALL)
    cdef double complex x = a
    cdef double s_done = 0.0
    cdef double complex Uc
    if use_call:
        Uc = complex(func(a + 0.5 * direction))
    else:
        Uc = pot_value(a + 0.5 * direction, icode, c_strength, c_offset,
                       c_shift, c_cpar, L)
    cdef double freq = cabs(Uc - uu) ** 0.5
    if freq < 1.0 / length:
        freq = 1.0 / length
    cdef double h = 0.1 / freq
    if h > 0.2 * length:
        h = 0.2 * length
    cdef double rt = rtol, at = atol
    cdef long nsteps = 0, msteps = max_steps
    cdef double complex hc, g, xs
    cdef double err, sc, fac, ay, ay5
    # Dormand-Prince tableau
    cdef double a2 = 0.2
    cdef double a31 = 3.0/40.0, a32 = 9.0/40.0
    cdef double a41 = 44.0/45.0, a42 = -56.0/15.0, a43 = 32.0/9.0
    cdef double a51 = 19372.0/6561.0, a52 = -25360.0/2187.0
    cdef double a53 = 64448.0/6561.0, a54 = -212.0/729.0
    cdef double a61 = 9017.0/3168.0, a62 = -355.0/33.0, a63 = 46732.0/5247.0
    cdef double a64 = 49.0/176.0, a65 = -5103.0/18656.0
    cdef double b1 = 35.0/384.0, b3 = 500.0/1113.0, b4 = 125.0/192.0
    cdef double b5 = -2187.0/6784.0, b6 = 11.0/84.0
    cdef double e1 = 35.0/384.0 - 5179.0/57600.0
    cdef double e3 = 500.0/1113.0 - 7571.0/16695.0
    cdef double e4 = 125.0/192.0 - 393.0/640.0
    cdef double e5 = -2187.0/6784.0 + 92097.0/339200.0
    cdef double e6 = 11.0/84.0 - 187.0/2100.0
    cdef double e7 = -1.0/40.0

    # first derivative
    _rhs(x, y, k[0], icode, uu, c_strength, c_offset, c_shift, c_cpar, L,
         use_call, func)
    while s_done < length * (1.0 - 1e-15):
        if h < 1e-14 * length:
            return _matrix(y), STATUS_UNDERFLOW
        if s_done + h > length:
            h = length - s_done
        hc = e * h
        for i in range(4):
            ytmp[i] = y[i] + hc * (a2 * k[0][i])
        _rhs(x + 0.2 * hc, ytmp, k[1], icode, uu, c_strength, c_offset,
             c_shift, c_cpar, L, use_call, func)
        for i in range(4):
            ytmp[i] = y[i] + hc * (a31 * k[0][i] + a32 * k[1][i])
        _rhs(x + 0.3 * hc, ytmp, k[2], icode, uu, c_strength, c_offset,
             c_shift, c_cpar, L, use_call, func)
        for i in range(4):
            ytmp[i] = y[i] + hc * (a41 * k[0][i] + a42 * k[1][i] + a43 * k[2][i])
        _rhs(x + 0.8 * hc, ytmp, k[3], icode, uu, c_strength, c_offset,
             c_shift, c_cpar, L, use_call, func)
        for i in range(4):
            ytmp[i] = y[i] + hc * (a51 * k[0][i] + a52 * k[1][i]
                                   + a53 * k[2][i] + a54 * k[3][i])
        _rhs(x + (8.0/9.0) * hc, ytmp, k[4], icode, uu, c_strength, c_offset,
             c_shift, c_cpar, L, use_call, func)
        for i in range(4):
            ytmp[i] = y[i] + hc * (a61 * k[0][i] + a62 * k[1][i]
                                   + a63 * k[2][i] + a64 * k[3][i]
                                   + a65 * k[4][i])
        _rhs(x + hc, ytmp, k[5], icode, uu, c_strength, c_offset,
             c_shift, c_cpar, L, use_call, func)
        for i in range(4):
            y5[i] = y[i] + hc * (b1 * k[0][i] + b3 * k[2][i] + b4 * k[3][i]
                                 + b5 * k[4][i] + b6 * k[5][i])
        _rhs(x + hc, y5, k[6], icode, uu, c_strength, c_offset,
             c_shift, c_cpar, L, use_call, func)
        err = 0.0
        for i in range(4):
            errv = hc * (e1 * k[0][i] + e3 * k[2][i] + e4 * k[3][i]
                         + e5 * k[4][i] + e6 * k[5][i] + e7 * k[6][i])
            ay = cabs(y[i]); ay5 = cabs(y5[i])
            sc = at + rt * (ay if ay > ay5 else ay5)
            if cabs(errv) / sc > err:
                err = cabs(errv) / sc
        if err <= 1.0:
            x = x + hc
            s_done += h
            for i in range(4):
                y[i] = y5[i]
                k[0][i] = k[6][i]
        if err < 1e-10:
            err = 1e-10
        fac = 0.9 * err ** -0.2
        if fac > 5.0:
            fac = 5.0
        if fac < 0.2:
            fac = 0.2
        h *= fac
        nsteps += 1
        if nsteps > msteps:
            return _matrix(y), STATUS_UNDERFLOW
    return _matrix(y), STATUS_OK


cdef int _rhs(double complex x, double complex* y, double complex* out,
              int code, double complex u, double complex strength,
              double complex offset, double complex shift,
              double complex cpar, LatPars L, bint use_call, object func):
    cdef double complex U
    if use_call:
        U = complex(func(x))
    else:
        U = pot_value(x, code, strength, offset, shift, cpar, L)
    cdef double complex g = U - u
    out[0] = y[1]
    out[1] = g * y[0]
    out[2] = y[3]
    out[3] = g * y[2]
    return 0


cdef object _matrix(double complex* y):
    out = np.empty((2, 2), dtype=complex)
    out[0, 0] = y[0]
    out[1, 0] = y[1]
    out[0, 1] = y[2]
    out[1, 1] = y[3]
    return out
