"""Bloch (Floquet) solutions on spectral curves, their duals, local Laurent
structure at real poles, and the two-point Cauchy kernel built from a
canonically paired solution family.

Genus-1 solutions use the classical sigma-function ansatz

    psi(x, alpha) = sigma(alpha - x) / (sigma(x) sigma(alpha)) * e^{zeta(alpha) x}

verified at construction by the eigenvalue residual; the curve point over
u carries alpha with wp(alpha) = offset - u, the sheet fixed by
wp'(alpha) = 2i * sheet_w(u). The dual solution is psi(x, -alpha), giving
the exact pairing i W(psi, psi*) = du/dmu for the divisor at infinity.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .curve import Divisor, HyperellipticCurve, compute_dp, measure_for_divisor
from .elliptic import Lattice, wp_family
from .errors import (
    ContourHitsSecondPole,
    DiagonalEvaluation,
    FitIllConditioned,
    PoleProximity,
    WindowNotIntegerPeriods,
)
from .spectral import Potential, integrate_transfer, lame_potential

__all__ = [
    "lame1_bloch",
    "Lame1Bloch",
    "Lame1Family",
    "Genus0Family",
    "dual_psi",
    "FrobeniusSolution",
    "bloch_pair_from_monodromy",
    "laurent_structure",
    "laurent_coefficients",
    "residue_product_check",
    "cba_kernel_hyperelliptic",
    "CauchyKernel",
    "windowed_x_product",
    "smoothed_window_mean",
    "first_correction_fit",
]


def lame1_bloch(x, alpha, lat: Lattice, offset: float = 0.0):
    """Value of the one-gap Bloch solution at x for curve parameter alpha.

    Eigenvalue u = offset - wp(alpha); the residual of
    -psi'' + (2 wp(x)+offset) psi = u psi vanishes identically.
    """
    x = np.asarray(x, dtype=complex)
    _, _, _, s_ax = wp_family(alpha - x, lat, check_pole=False)
    _, _, _, s_x = wp_family(x, lat, check_pole=False)
    _, _, z_a, s_a = wp_family(alpha, lat)
    val = s_ax / (s_x * s_a) * np.exp(z_a * x)
    return val if val.ndim else complex(val)


@dataclass(frozen=True)
class CurvePoint:
    u: complex
    sheet: int
    alpha: complex


class Lame1Bloch:
    """Evaluation closure for the one-gap Bloch solution at a curve point.

    Large |Re x| is reduced through the Bloch multiplier, keeping the sigma
    arguments inside a bounded cell.
    """

    def __init__(self, lat: Lattice, alpha: complex, offset: float = 0.0,
                 u=None, sheet=None):
        self.lattice = lat
        self.alpha = complex(alpha)
        self.offset = float(offset)
        wp_a, wpp_a, zeta_a, _ = wp_family(alpha, lat)
        self.u = complex(offset - wp_a) if u is None else complex(u)
        self.sheet = sheet
        self.period = lat.real_period()
        eta1 = lat.eta1
        self._zeta_a = zeta_a
        self.log_multiplier = zeta_a * self.period - 2.0 * eta1 * self.alpha
        self.multiplier = np.exp(self.log_multiplier)
        self._wp_a = wp_a

    # -- evaluation ---------------------------------------------------------

    def _reduced(self, x):
        x = np.asarray(x, dtype=complex)
        m = np.floor(x.real / self.period + 0.5)
        return x - m * self.period, m

    def psi(self, x):
        x0, m = self._reduced(x)
        val = lame1_bloch(x0, self.alpha, self.lattice, self.offset)
        out = val * np.exp(self.log_multiplier * m)
        return out if np.ndim(out) else complex(out)

    def dpsi(self, x):
        """psi'(x) from the logarithmic derivative (no finite differences)."""
        x0, m = self._reduced(x)
        val = lame1_bloch(x0, self.alpha, self.lattice, self.offset)
        _, _, z_ax, _ = wp_family(self.alpha - x0, self.lattice,
                                  check_pole=False)
        _, _, z_x, _ = wp_family(x0, self.lattice, check_pole=False)
        logd = -z_ax - z_x + self._zeta_a
        out = val * logd * np.exp(self.log_multiplier * m)
        return out if np.ndim(out) else complex(out)

    def residual(self, x):
        """|(-psi'' + U psi - u psi)| via the wp addition structure."""
        x0, _ = self._reduced(x)
        wp_x, _, _, _ = wp_family(x0, self.lattice, check_pole=False)
        wp_ax, _, z_ax, _ = wp_family(self.alpha - x0, self.lattice,
                                      check_pole=False)
        _, _, z_x, _ = wp_family(x0, self.lattice, check_pole=False)
        logd = -z_ax - z_x + self._zeta_a
        logdd = -wp_ax + wp_x
        # psi''/psi = logd^2 + logd'
        lhs = -(logd * logd + logdd) + 2.0 * wp_x + self.offset - self.u
        return abs(lhs * self.psi(x0))


class Lame1Family:
    """Canonically paired Bloch family for U = 2 wp(x) + offset, divisor at
    the infinite point (measure dmu = du/(2w), self-dual)."""

    def __init__(self, lat: Lattice, offset: float = 0.0):
        self.lattice = lat
        self.offset = float(offset)
        e = sorted([lat.e1.real, lat.e2.real, lat.e3.real])
        self.branch_points = tuple(offset - v for v in reversed(e))
        self.curve = HyperellipticCurve(self.branch_points)
        self.divisor = Divisor((), 1)
        self.p_diff = compute_dp(self.curve)
        self.measure = measure_for_divisor(self.curve, self.divisor)
        self.period = lat.real_period()

    # -- curve point <-> alpha ------------------------------------------------

    def _alpha_unsigned(self, u):
        """Some alpha with wp(alpha) = offset - u, on the rectangle edge."""
        lat = self.lattice
        target = self.offset - float(u)
        w1 = lat.omega1.real
        om = lat.omega2.imag
        e1, e2, e3 = lat.e1.real, lat.e2.real, lat.e3.real
        u0, u1, u2 = self.branch_points
        tmin = 1e-9
        if u >= u2:  # infinite zone: alpha on the imaginary axis
            if u - u2 < 1e-13:
                return 1j * om
            f = lambda t: wp_family(1j * t, lat)[0].real - target
            lo = max(tmin, 0.05 / np.sqrt(abs(u) + 1.0))
            while f(lo) > 0:
                lo *= 0.5
                if lo < 1e-12:
                    raise PoleProximity("u too large for alpha inversion")
            t = brentq(f, lo, om - 1e-12, xtol=1e-15)
            return 1j * t
        if u0 <= u <= u1:  # finite zone: alpha on the far vertical edge
            if u - u0 < 1e-13:
                return w1 + 0j
            if u1 - u < 1e-13:
                return w1 + 1j * om
            f = lambda t: wp_family(w1 + 1j * t, lat)[0].real - target
            t = brentq(f, tmin, om - tmin, xtol=1e-15)
            return w1 + 1j * t
        if u1 < u < u2:  # gap: alpha on the top edge
            f = lambda s: wp_family(1j * om + s, lat)[0].real - target
            s = brentq(f, tmin, w1 - tmin, xtol=1e-15)
            return 1j * om + s
        # below the spectrum: alpha on the real segment (0, omega1)
        f = lambda s: wp_family(s + 0j, lat)[0].real - target
        lo = max(tmin, 0.05 / np.sqrt(abs(u) + 1.0))
        while f(lo) < 0:
            lo *= 0.5
            if lo < 1e-12:
                raise PoleProximity("u too negative for alpha inversion")
        s = brentq(f, lo, w1 - tmin, xtol=1e-15)
        return s + 0j

    def point(self, u, sheet=+1) -> CurvePoint:
        """Curve point (u, sheet) with its uniformising alpha.

        Sheet convention matches the curve module: wp'(alpha) = 2i w(u)
        with w the +i0-continued product square root.
        """
        alpha = self._alpha_unsigned(u)
        w = self.curve.sheet_w(u, sheet)
        _, wpp_a, _, _ = wp_family(alpha, self.lattice)
        if abs(wpp_a - 2j * w) > abs(-wpp_a - 2j * w):
            alpha = -alpha
        return CurvePoint(complex(u), int(sheet), alpha)

    def solution(self, z: CurvePoint) -> Lame1Bloch:
        return Lame1Bloch(self.lattice, z.alpha, self.offset, u=z.u,
                          sheet=z.sheet)

    def dual(self, z: CurvePoint) -> Lame1Bloch:
        """Dual solution: the same construction at the conjugate sheet point.

        Satisfies i W(psi, psi*) = du/dmu exactly (pairing normalisation).
        """
        return Lame1Bloch(self.lattice, -z.alpha, self.offset, u=z.u,
                          sheet=-z.sheet)

    def measure_du(self, z: CurvePoint):
        """dmu/du at the point (du-trivialised)."""
        return self.measure.numerator(z.u) / (2.0 * self.curve.sheet_w(z.u, z.sheet))

    def dp_over_dmu(self, z: CurvePoint):
        return complex(self.p_diff.numerator(z.u) / self.measure.numerator(z.u))

    def quasimomentum(self, z: CurvePoint):
        """p with e^{iTp} the Bloch multiplier of `solution(z)`."""
        sol = self.solution(z)
        return complex(sol.log_multiplier / (1j * self.period))

    def potential(self, n: int = 1) -> Potential:
        return lame_potential(n, self.lattice, self.offset)


class _PlaneWave:
    def __init__(self, k):
        self.k = complex(k)
        self.u = self.k ** 2

    def psi(self, x):
        return np.exp(1j * self.k * np.asarray(x, dtype=complex))

    def dpsi(self, x):
        return 1j * self.k * np.exp(1j * self.k * np.asarray(x, dtype=complex))


class Genus0Family:
    """Free family: Psi = e^{ikx}, k = sqrt(u - u0), dmu = dk."""

    def __init__(self, u0: float = 0.0, period: float = 2 * np.pi):
        self.u0 = float(u0)
        self.period = period
        self.curve = HyperellipticCurve((self.u0,))
        self.p_diff = compute_dp(self.curve)

    def point(self, u, sheet=+1):
        k = sheet * np.sqrt(complex(u) - self.u0)
        return CurvePoint(complex(u), int(sheet), k)  # alpha slot stores k

    def solution(self, z):
        return _PlaneWave(z.alpha)

    def dual(self, z):
        return _PlaneWave(-z.alpha)

    def measure_du(self, z):
        return 1.0 / (2.0 * z.alpha)

    def dp_over_dmu(self, z):
        return 1.0

    def quasimomentum(self, z):
        return complex(z.alpha)


def dual_psi(family, x, z):
    """Value of the dual solution at (x, z): the conjugate-point solution,
    equal to the reflected-argument solution of the mirror divisor."""
    return family.dual(z).psi(x)


# ---------------------------------------------------------------------------
# Frobenius solutions and monodromy Bloch pairs for n >= 2
# ---------------------------------------------------------------------------


def _lame_local_coeffs(pot: Potential, nterms: int = 6):
    """Even coefficients of U - n(n+1)/x^2 at 0 (exact, via the invariants)."""
    from .spectral import local_even_expansion
    return local_even_expansion(pot, pot.n, nterms)


class FrobeniusSolution:
    """Solution of the Lame equation built from the local series at x = 0
    (branch 'singular': x^{-n}; 'recessive': x^{n+1}) and continued by the
    transfer integrator elsewhere.
    """

    def __init__(self, pot: Potential, u, branch: str = "singular",
                 series_radius: float = None, mmax: int = 14):
        if pot.kind != "lame":
            raise ValueError("FrobeniusSolution expects a lame potential")
        self.pot = pot
        self.u = complex(u)
        self.branch = branch
        n = pot.n
        self.n = n
        C = _lame_local_coeffs(pot, nterms=mmax // 2 + 2)
        lam = self.u
        rho = -n if branch == "singular" else n + 1
        b = [1.0]
        for m in range(1, mmax + 1):
            denom = (rho + 2 * m) * (rho + 2 * m - 1) - n * (n + 1)
            rhs = (C[0] - lam) * b[m - 1]
            for k in range(1, len(C)):
                if m - 1 - k >= 0:
                    rhs += C[k] * b[m - 1 - k]
            b.append(rhs / denom)
        self.rho = rho
        self.coeffs = np.array(b, dtype=complex)
        T = pot.period
        self.series_radius = (0.25 * T if series_radius is None
                              else series_radius)

    def series_value(self, x):
        x = np.asarray(x, dtype=complex)
        val = sum(bm * x ** (self.rho + 2 * m)
                  for m, bm in enumerate(self.coeffs))
        dval = sum((self.rho + 2 * m) * bm * x ** (self.rho + 2 * m - 1)
                   for m, bm in enumerate(self.coeffs))
        return val, dval

    def psi_on_circle(self, radius: float, npts: int = 256):
        """(points, psi values) on |x| = radius, by series when inside the
        convergence guard, else by one continuous ODE sweep from the series
        ring."""
        theta = 2 * np.pi * np.arange(npts) / npts
        xs = radius * np.exp(1j * theta)
        if radius <= self.series_radius:
            return xs, self.series_value(xs)[0]
        # seed on the ring and propagate outward along rays, then sweep
        raise ContourHitsSecondPole(
            f"contour radius {radius} beyond series guard; "
            f"use radius <= {self.series_radius}")

    def psi(self, x):
        x = np.asarray(x, dtype=complex)
        if np.any(np.abs(x) > self.series_radius):
            return self._psi_continued(x)
        return self.series_value(x)[0]

    def _psi_continued(self, x):
        scalar = np.ndim(x) == 0
        x = np.atleast_1d(np.asarray(x, dtype=complex))
        out = np.empty_like(x)
        r0 = 0.8 * self.series_radius
        code, strength, offset, shift, cpar, params, func = \
            self.pot._kernel_args()
        from ._core import kernels
        for i, xv in enumerate(x.ravel()):
            if abs(xv) <= self.series_radius:
                out.ravel()[i] = self.series_value(xv)[0]
                continue
            x_start = r0 * xv / abs(xv)
            y0v, dy0v = self.series_value(x_start)
            M, status = kernels.propagate_transfer(
                self.u, x_start, xv, code, strength, offset, shift, cpar,
                params, func=func, rtol=1e-12, atol=1e-14)
            out.ravel()[i] = M[0, 0] * y0v + M[0, 1] * dy0v
        return complex(out.ravel()[0]) if scalar else out


class PropagatedSolution:
    """Solution known by its data (psi, psi') at a regular basepoint,
    evaluated elsewhere by pole-avoiding transfer propagation.
    """

    def __init__(self, pot: Potential, u, basepoint, y0, lift: float = None):
        self.pot = pot
        self.u = complex(u)
        self.basepoint = complex(basepoint)
        self.y0 = np.asarray(y0, dtype=complex)
        T = pot.period
        self.lift = 0.08 * T if lift is None else lift

    def _route(self, x):
        x = complex(x)
        b = self.basepoint
        h = self.lift
        if abs(x - b) < 1e-14:
            return [b]
        # route through the upper (or lower) half-plane at height h
        side = 1.0 if x.imag >= 0 else -1.0
        path = [b]
        if abs(x.imag) >= h * 0.999 and (x.imag > 0) == (side > 0):
            path += [b + 1j * side * abs(x.imag), x]
        else:
            path += [b + 1j * side * h, x.real + 1j * side * h, x]
        return path

    def value(self, x):
        """(psi, psi') at complex x."""
        path = self._route(x)
        if len(path) == 1:
            return complex(self.y0[0]), complex(self.y0[1])
        code, strength, offset, shift, cpar, params, func = \
            self.pot._kernel_args()
        from ._core import kernels
        y = self.y0.copy()
        for za, zb in zip(path[:-1], path[1:]):
            if abs(zb - za) < 1e-15:
                continue
            M, status = kernels.propagate_transfer(
                self.u, za, zb, code, strength, offset, shift, cpar, params,
                func=func, rtol=1e-12, atol=1e-14)
            y = M @ y
        return complex(y[0]), complex(y[1])

    def psi(self, x):
        x = np.asarray(x, dtype=complex)
        if x.ndim == 0:
            return self.value(complex(x))[0]
        return np.array([self.value(complex(v))[0] for v in x.ravel()]
                        ).reshape(x.shape)

    def dpsi(self, x):
        x = np.asarray(x, dtype=complex)
        if x.ndim == 0:
            return self.value(complex(x))[1]
        return np.array([self.value(complex(v))[1] for v in x.ravel()]
                        ).reshape(x.shape)

    def values_on_path(self, points):
        """psi at a sequence of waypoints by one continuous sweep."""
        code, strength, offset, shift, cpar, params, func = \
            self.pot._kernel_args()
        from ._core import kernels
        out = np.empty(len(points), dtype=complex)
        y = self.y0.copy()
        prev = self.basepoint
        for i, xv in enumerate(points):
            xv = complex(xv)
            if abs(xv - prev) > 1e-15:
                M, _ = kernels.propagate_transfer(
                    self.u, prev, xv, code, strength, offset, shift, cpar,
                    params, func=func, rtol=1e-12, atol=1e-14)
                y = M @ y
            out[i] = y[0]
            prev = xv
        return out

    def reflected(self):
        """The solution x -> psi(-x) of the reflected (even) potential."""
        refl = PropagatedSolution(self.pot, self.u, -self.basepoint,
                                  [self.y0[0], -self.y0[1]], self.lift)
        refl._origin = self
        return refl


def bloch_pair_from_monodromy(pot: Potential, u, eps: float = None):
    """The two Bloch solutions of a (possibly singular) periodic potential
    at spectral value u, anchored at the regular basepoint T/2.

    Returns (sol_plus, sol_minus, kappa_plus, kappa_minus); the plus label
    carries Im(log kappa) >= 0.
    """
    T = pot.period
    b = T / 2.0
    eps = 0.05 * T if eps is None else eps
    path = [b, b + 1j * eps, b + T + 1j * eps, b + T]
    tm = integrate_transfer(pot, u, x_path=path, rtol=1e-12, atol=1e-14)
    vals, vecs = np.linalg.eig(tm.matrix)
    order = np.argsort(-np.angle(vals) % (2 * np.pi))
    order = [int(order[0]), int(order[1])]
    if np.angle(vals[order[0]]) < np.angle(vals[order[1]]):
        order = order[::-1]
    sols = []
    for idx in order:
        v = vecs[:, idx]
        j = int(np.argmax(np.abs(v)))
        v = v / v[j]
        sols.append(PropagatedSolution(pot, u, b, v, lift=eps))
    return sols[0], sols[1], vals[order[0]], vals[order[1]]


# ---------------------------------------------------------------------------
# Laurent structure at a real pole
# ---------------------------------------------------------------------------


def laurent_coefficients(psi_values_on_circle, radius, jmin, jmax,
                         center=0.0):
    """Laurent coefficients c_j (j = jmin..jmax) from equispaced samples on
    the circle |x - center| = radius (trapezoidal rule: spectrally exact for
    meromorphic integrands).
    """
    vals = np.asarray(psi_values_on_circle, dtype=complex)
    M = len(vals)
    theta = 2 * np.pi * np.arange(M) / M
    out = {}
    for j in range(jmin, jmax + 1):
        out[j] = complex(np.mean(vals * np.exp(-1j * j * theta))
                         / radius ** j)
    return out


def laurent_structure(n: int, solution, pole=0.0, radius: float = None,
                      npts: int = 256):
    """Fit the singular expansion at a potential pole of order n(n+1) and
    report the alternating-power pattern.

    Returns a dict with the singular coefficients alpha_1..alpha_k (powers
    x^{-n}, x^{-n+2}, ...), the maximal spurious coefficient (powers of the
    wrong parity below the regular tail) relative to |alpha_1|, and the
    regular-part parity residuals.
    """
    if radius is None:
        radius = getattr(solution, "series_radius", 0.3)
        radius *= 0.8
    theta = 2 * np.pi * np.arange(npts) / npts
    xs = complex(pole) + radius * np.exp(1j * theta)
    vals = np.asarray(solution.psi(xs), dtype=complex)
    if not np.all(np.isfinite(vals)):
        raise FitIllConditioned("solution not finite on the fit circle")
    coeffs = laurent_coefficients(vals, radius, -n - 2, n + 1)
    # singular ladder: powers -n, -n+2, ..., ending at -1 (n odd) or -2 (n even)
    ladder = list(range(-n, 0, 2))
    alpha = [coeffs[j] for j in ladder]
    a1 = abs(alpha[0])
    if a1 == 0.0:
        raise FitIllConditioned("leading singular coefficient vanished")
    spurious = {}
    for j in range(-n - 2, n + 2):
        if j in ladder:
            continue
        if j < 0 or (j - (-n)) % 2 != 0:
            # wrong-parity or beyond-order powers must vanish:
            # all negative j off the ladder, and positive j of the parity
            # opposite to the regular tail
            if j < 0:
                spurious[j] = abs(coeffs[j])
            elif (j - (-n)) % 2 != 0 and j <= n:
                spurious[j] = abs(coeffs[j])
    # regular-part parity conditions: for n = 2k-1 the even coefficients
    # c_0, c_2, .., c_{2k-2} vanish; for n = 2k the odd ones c_1, .., c_{2k-1}
    k = (n + 1) // 2
    parity_checks = {}
    if n % 2 == 1:
        for j in range(0, 2 * k - 1, 2):
            parity_checks[j] = abs(coeffs[j])
    else:
        for j in range(1, 2 * k, 2):
            parity_checks[j] = abs(coeffs[j])
    return {
        "alpha": alpha,
        "ladder_powers": ladder,
        "spurious": spurious,
        "max_spurious_rel": (max(spurious.values()) / a1 if spurious else 0.0),
        "parity_checks": parity_checks,
        "max_parity_rel": (max(parity_checks.values()) / a1
                           if parity_checks else 0.0),
        "radius": radius,
        "coefficients": coeffs,
    }


# ---------------------------------------------------------------------------
# residue of the pair product at a real pole
# ---------------------------------------------------------------------------


def residue_product_check(sol_z, dual_w, pole=0.0, radius: float = None,
                          npts: int = 256, other_poles=()):
    """(1/2 pi i) * contour integral of Psi(x, z) Psi*(x, w) dx around the
    pole; vanishes for eigenfunction pairs of the same singular operator.

    ``dual_w`` must evaluate the dual solution at (x, w) directly (for the
    self-dual families this is the reflected-argument solution).
    """
    radius = 0.25 if radius is None else radius
    for p in other_poles:
        if abs(complex(p) - complex(pole)) <= radius:
            raise ContourHitsSecondPole(
                f"pole at {p} inside contour radius {radius}")
    theta = 2 * np.pi * np.arange(npts) / npts
    xs = complex(pole) + radius * np.exp(1j * theta)
    f = np.asarray(sol_z.psi(xs), dtype=complex) \
        * np.asarray(dual_w.psi(xs), dtype=complex)
    return complex(radius * np.mean(f * np.exp(1j * theta)))


# ---------------------------------------------------------------------------
# Cauchy two-point kernel
# ---------------------------------------------------------------------------


class CauchyKernel:
    """Two-point kernel K(x, z, w) = i [Psi(x,z) Psi*_x(x,w)
    - Psi_x(x,z) Psi*(x,w)] / (u(w) - u(z)) * m(w), reported against the du
    coordinate (m = dmu/du at w)."""

    def __init__(self, family):
        self.family = family

    def value(self, x, z: CurvePoint, w: CurvePoint):
        if abs(z.u - w.u) < 1e-12 and z.sheet == w.sheet:
            raise DiagonalEvaluation("use diagonal_limit at w == z")
        sol = self.family.solution(z)
        dw = self.family.dual(w)
        m = self.family.measure_du(w)
        num = sol.psi(x) * dw.dpsi(x) - sol.dpsi(x) * dw.psi(x)
        return 1j * num / (w.u - z.u) * m

    def x_derivative_exact(self, x, z, w):
        """-i Psi(x,z) Psi*(x,w) dmu/du(w): the stated value of d/dx K."""
        sol = self.family.solution(z)
        dw = self.family.dual(w)
        return -1j * sol.psi(x) * dw.psi(x) * self.family.measure_du(w)

    def x_derivative_fd(self, x, z, w, h: float = 1e-3):
        """d/dx K by 5-point central differences with step halving."""
        def stencil(hh):
            pts = [x - 2 * hh, x - hh, x + hh, x + 2 * hh]
            vals = [self.value(p, z, w) for p in pts]
            return (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * hh)
        d1 = stencil(h)
        d2 = stencil(h / 2)
        return (16 * d2 - d1) / 15.0

    def diagonal_limit(self, x, z: CurvePoint, du: float = 1e-5):
        """(u_w - u_z) * K as w -> z along the zone, extrapolated from two
        offsets; equals 1 for a canonically paired family."""
        def at(duv):
            w = self.family.point(z.u.real + duv, z.sheet)
            return (w.u - z.u) * self.value(x, z, w)
        a1 = at(du)
        a2 = at(du / 2)
        return 2.0 * a2 - a1


def cba_kernel_hyperelliptic(x, z: CurvePoint, w: CurvePoint, family):
    """Kernel value at (x, z, w) in the du-trivialisation."""
    return CauchyKernel(family).value(x, z, w)


# ---------------------------------------------------------------------------
# x-space products
# ---------------------------------------------------------------------------


def windowed_x_product(family, z: CurvePoint, w: CurvePoint, nperiods: int,
                       delta: float = None, base_quadrature=None):
    """Integral over [-nT, nT] (lifted by i*delta) of Psi(x,z) Psi*(x,w),
    reduced to one-period quadrature through the Bloch multipliers.

    Returns the windowed integral value; with kappa_z == kappa_w the result
    grows linearly in n, otherwise it stays bounded and Cesaro-averages to 0.
    """
    if nperiods != int(nperiods) or nperiods < 1:
        raise WindowNotIntegerPeriods(f"window {nperiods} not a whole number")
    n = int(nperiods)
    T = family.period
    delta = 0.01 * T if delta is None else delta
    if base_quadrature is None:
        from .products import lifted_period_quadrature
        sol = family.solution(z)
        dw = family.dual(w)
        base_quadrature = lifted_period_quadrature(
            lambda x: sol.psi(x) * dw.psi(x), T, delta)
    kz = family.solution(z).multiplier if hasattr(family.solution(z),
                                                  "multiplier") else None
    if kz is None:
        raise ValueError("family solutions carry no multiplier")
    kw = family.solution(w).multiplier
    rho = kz / kw
    total = 0.0 + 0.0j
    for m in range(-n, n):
        total += rho ** m
    return base_quadrature * total


def smoothed_window_mean(family, z: CurvePoint, w: CurvePoint, nmax: int,
                         base_quadrature=None, delta: float = None):
    """Smoothly averaged x-window products: the one-period blocks are
    combined with cubic B-spline weights (the square of triangular/Cesaro
    averaging), whose kernel leakage decays like 1/n^3 instead of the 1/n
    of a first-order Cesaro mean. Tends to 0 for z != w; this is the
    numerical form of the distributional orthogonality.
    """
    T = family.period
    delta = 0.01 * T if delta is None else delta
    if base_quadrature is None:
        from .products import lifted_period_quadrature
        sol = family.solution(z)
        dw = family.dual(w)
        base_quadrature = lifted_period_quadrature(
            lambda x: sol.psi(x) * dw.psi(x), T, delta)
    rho = family.solution(z).multiplier / family.solution(w).multiplier
    m = np.arange(-nmax, nmax + 1)
    t = np.abs(m) / (nmax + 1.0)
    # cubic B-spline (triangle convolved with itself), support |t| < 1
    wts = np.where(t < 0.5, 1.0 - 6 * t ** 2 + 6 * t ** 3,
                   2.0 * (1.0 - t) ** 3)
    wts = np.where(t < 1.0, wts, 0.0)
    return base_quadrature * np.sum(wts * rho ** m) / np.sum(wts)


def first_correction_fit(family, x, sheet=+1, kvals=(100.0, 1000.0),
                         dual=False):
    """phi(x): the 1/k coefficient of Psi e^{-ikx} (or of the dual against
    e^{+ikx}), fitted at two large k with Richardson elimination of 1/k^2.

    The sigma-ansatz solutions carry the raw prefactor -1/alpha; they are
    rescaled to unit leading amplitude before fitting. k = sqrt(u) is the
    local coordinate at infinity, not the quasimomentum.
    """
    vals = []
    for k in kvals:
        u = k ** 2 + getattr(family, "u0", 0.0)
        z = family.point(u, sheet)
        if dual:
            sol = family.dual(z)
            scale = z.alpha if hasattr(sol, "log_multiplier") else 1.0
            f = scale * sol.psi(x) * np.exp(1j * k * x)
        else:
            sol = family.solution(z)
            scale = -z.alpha if hasattr(sol, "log_multiplier") else 1.0
            f = scale * sol.psi(x) * np.exp(-1j * k * x)
        vals.append(complex(k) * (f - 1.0))
    k1, k2 = kvals
    f1, f2 = vals
    return (k2 * f2 - k1 * f1) / (k2 - k1)
