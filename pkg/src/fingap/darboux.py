"""Crum (Darboux) transformations: single steps, ground-state chains that
grow an r(r+1)/x^2 pole while keeping the spectral curve, and the catalog
of degenerate closed-form potentials.

A step with seed eigenfunction eta at level lam maps

    U -> U - 2 (log eta)'' = 2*lam - U + 2 (eta'/eta)^2,
    f -> f' - (eta'/eta) f,

where eta'' is always eliminated through the equation eta'' = (U-lam) eta
(no numerical differentiation of eta enters the transformed potential).
"""

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import EtaVanishesOnGrid, GroundStateNotFound
from .spectral import (
    Potential,
    callable_potential,
    dirichlet_miss,
    dirichlet_shooting_oracle,
    local_even_expansion,
)

__all__ = [
    "CrumStep",
    "crum_step",
    "crum_chain",
    "ChainResult",
    "degenerate_catalog_check",
]


class _ChebSolution:
    """eta on (a, b) as Chebyshev series for (eta, eta'), complex-evaluable
    near the interval; near the potential poles the recessive series
    x^{m+1}(1 + b2 x^2 + ...) takes over.

    The fit degree is kept moderate: high-degree fits of ODE samples
    amplify their noise floor exponentially when evaluated off the real
    axis, which is exactly where the chain potential is needed by the
    lifted monodromy paths.
    """

    def __init__(self, pot, lam, mpole, a, b, ncheb=440, fit_degree=220,
                 seed_mmax=24):
        self.pot = pot
        self.lam = float(lam)
        self.mpole = int(mpole)
        self.a = float(a)
        self.b = float(b)
        nodes = np.cos(np.pi * np.arange(ncheb + 1) / ncheb)  # 1 .. -1
        xs = 0.5 * (self.a + self.b) + 0.5 * (self.b - self.a) * nodes
        order = np.argsort(xs)
        xs_sorted = xs[order]

        def rhs(x, y):
            U = complex(pot.value(x)).real
            return [y[1], (U - self.lam) * y[0]]

        if mpole == 0:
            y0 = [0.0, 1.0]
            t0 = 0.0
        else:
            C = local_even_expansion(pot, mpole, nterms=12)
            from .spectral import _frobenius_seed
            t0 = self.a
            y0 = list(_frobenius_seed(mpole, C, self.lam, self.a,
                                      mmax=seed_mmax))
        sol = solve_ivp(rhs, (t0, self.b), y0, method="DOP853",
                        t_eval=xs_sorted, rtol=1e-12, atol=1e-14)
        if not sol.success:
            raise GroundStateNotFound(sol.message)
        vals = np.empty(ncheb + 1)
        dvals = np.empty(ncheb + 1)
        vals[order] = sol.y[0]
        dvals[order] = sol.y[1]
        scale = float(np.max(np.abs(vals)))
        self._eta = cheb.Chebyshev.fit(xs, vals / scale, fit_degree,
                                       domain=[self.a, self.b])
        self._deta = cheb.Chebyshev.fit(xs, dvals / scale, fit_degree,
                                        domain=[self.a, self.b])

    def eta(self, x):
        return self._eta(x)

    def deta(self, x):
        return self._deta(x)


@dataclass
class CrumStep:
    """One factorisation step: carries the seed data and the transformed
    potential as closures."""

    seed: Potential
    lam: float
    eta: object          # callable eta(x)
    deta: object         # callable eta'(x)
    transformed: Potential

    def log_derivative(self, x):
        e = self.eta(x)
        if np.any(np.abs(e) < 1e-300):
            raise EtaVanishesOnGrid("eta vanishes at an evaluation point")
        return self.deta(x) / e

    def map_eigenfunction(self, f, df):
        """(f, f') -> transformed eigenfunction value: f' - (eta'/eta) f."""
        def g(x):
            return df(x) - self.log_derivative(x) * f(x)
        return g

    def factorization_residual(self, xs, probe, dprobe, ddprobe):
        """Residual of L = -(d+a)(d-a) + lam on a probe function, checked
        against -probe'' + U probe (a = (log eta)')."""
        xs = np.asarray(xs, dtype=float)
        a = self.log_derivative(xs)
        U = np.real(self.seed.value(xs))
        # (d - a) probe
        g = dprobe(xs) - a * probe(xs)
        # a' = (U - lam) - a^2 via the eta equation
        da = (U - self.lam) - a * a
        dg = ddprobe(xs) - da * probe(xs) - a * dprobe(xs)
        lhs = -(dg + a * g) + self.lam * probe(xs)
        rhs = -ddprobe(xs) + U * probe(xs)
        return np.max(np.abs(lhs - rhs))


def crum_step(U: Potential, eta, lam, deta) -> CrumStep:
    """Single Crum step from a seed solution eta (with derivative deta) at
    level lam. Returns the step with the transformed potential
    2*lam - U + 2 (eta'/eta)^2 as a callable potential."""

    def transformed_value(x):
        e = eta(x)
        return 2.0 * lam - U.value(x) + 2.0 * (deta(x) / e) ** 2

    poles = tuple(U.real_poles)
    new_pot = callable_potential(transformed_value, U.period,
                                 real_poles=poles)
    return CrumStep(U, float(lam), eta, deta, new_pot)


@dataclass
class ChainResult:
    potential: Potential        # U_r with the r(r+1)/x^2 pole at 0
    steps: list                 # CrumStep per iteration
    removed_levels: list        # ground-state eigenvalues removed
    pole_coefficient: float     # fitted leading coefficient at x = 0


class _ChainPotential:
    """U_{j+1}(x) = 2 lam - U_j(x) + 2 (eta'/eta)^2 with eta given by the
    Chebyshev solution in the bulk and its recessive series at the ends."""

    def __init__(self, prev: Potential, chebsol: _ChebSolution, lam, mpole,
                 margin):
        self.prev = prev
        self.sol = chebsol
        self.lam = float(lam)
        self.mpole = int(mpole)      # pole order of the PREVIOUS potential
        self.margin = margin
        self.T = prev.period
        ncoef = 14 if prev.kind in _EXACT_KINDS else 5
        self._seed_coeffs = local_even_expansion(prev, mpole, nterms=ncoef)

    def _logderiv(self, x):
        # x reduced to [0, T); use the series near 0 and T, cheb in the bulk
        T = self.T
        xr = np.asarray(x, dtype=complex)
        m = np.floor(np.real(xr) / T)
        xr = xr - m * T
        out = np.empty_like(xr)
        flat_x = np.atleast_1d(xr)
        flat_o = np.atleast_1d(out)
        for i, xv in enumerate(flat_x.ravel()):
            # reflect into [0, T/2] using evenness about 0 and T
            sign = 1.0
            xe = xv
            if np.real(xe) > T / 2:
                xe = T - xe
                sign = -1.0
            if abs(xe) < self.margin:
                psi, dpsi = _series_pair(self._seed_coeffs, self.mpole,
                                         self.lam, xe)
                val = dpsi / psi
            else:
                val = self.sol.deta(xe) / self.sol.eta(xe)
            flat_o.ravel()[i] = sign * val
        out = flat_o.reshape(np.shape(xr))
        return out if out.ndim else complex(out)

    def __call__(self, x):
        a = self._logderiv(x)
        return 2.0 * self.lam - np.asarray(self.prev.value(x)) + 2.0 * a * a


def _series_pair(C, npole, lam, x, mmax=26):
    """Recessive Frobenius pair at complex x (series about 0)."""
    n = npole
    b = [1.0]
    for m in range(1, mmax + 1):
        denom = (n + 1 + 2 * m) * (n + 2 * m) - n * (n + 1)
        rhs = (C[0] - lam) * b[m - 1]
        for k in range(1, len(C)):
            if m - 1 - k >= 0:
                rhs += C[k] * b[m - 1 - k]
        b.append(rhs / denom)
    psi = sum(bm * x ** (n + 1 + 2 * m) for m, bm in enumerate(b))
    dpsi = sum((n + 1 + 2 * m) * bm * x ** (n + 2 * m)
               for m, bm in enumerate(b))
    return psi, dpsi


def _ground_state(pot: Potential, mpole: int, search, ngrid=60):
    eigs = dirichlet_shooting_oracle(pot, search, npole=mpole, ngrid=ngrid)
    if not eigs:
        raise GroundStateNotFound(
            f"no Dirichlet level in {search} for {pot.label}")
    return eigs[0]


_EXACT_KINDS = ("free", "shifted_lame", "lame", "sin", "sinh",
                "inverse_square")


def _series_margin(pot: Potential) -> float:
    """Radius below which the recessive Frobenius series represents eta.

    Bounded by the convergence radius (distance from 0 to the nearest other
    singularity of U) for the analytically known kinds; small for fitted
    callables.
    """
    T = pot.period
    if pot.kind not in _EXACT_KINDS:
        return 0.05 * T
    radius = T
    if pot.kind in ("lame", "shifted_lame"):
        lat = pot.lattice
        omega = lat.imaginary_shift()
        radius = min(T, 2 * omega) if pot.kind == "lame" else min(T, omega)
    return min(0.4 * radius, 0.45 * (T / 2))


def crum_chain(U0: Potential, r: int, search=None) -> ChainResult:
    """r ground-state Crum iterations from a smooth periodic seed.

    Step j uses the Dirichlet (vanishing-at-poles) ground state of the
    current potential, raising the pole at 0 from j(j+1)/x^2 to
    (j+1)(j+2)/x^2 while keeping the monodromy trace away from the removed
    levels. Returns the final potential and the removed eigenvalues.
    """
    T = U0.period
    if search is None:
        lo = float(np.min(np.real(U0.value(np.linspace(0.05 * T, 0.95 * T,
                                                       97))))) - 1.0
        search = (lo, lo + 60.0)
    pot = U0
    steps = []
    removed = []
    for j in range(r):
        lam = _ground_state(pot, j, search)
        margin = _series_margin(pot)
        chebsol = _ChebSolution(pot, lam, j, margin if j > 0 else 0.0,
                                T - (margin if j > 0 else 0.0))
        # eta closures: series below the margin, Chebyshev in the bulk
        chain_val = _ChainPotential(pot, chebsol, lam, j, margin)
        new_poles = ((0.0, (j + 1) * (j + 2)),)
        new_pot = callable_potential(chain_val, T, real_poles=new_poles)
        new_pot = Potential(**{**new_pot.__dict__,
                               "label": f"crum^{j+1}[{U0.label}]"})
        steps.append(CrumStep(pot, float(lam),
                              lambda x, s=chebsol: s.eta(x),
                              lambda x, s=chebsol: s.deta(x), new_pot))
        removed.append(float(lam))
        pot = new_pot
        search = (lam + 1e-3 * max(1.0, abs(lam)), search[1])
    coef = fit_pole_coefficient(pot, r)
    return ChainResult(pot, steps, removed, coef)


def fit_pole_coefficient(pot: Potential, r: int, radii=(0.02, 0.01, 0.005)):
    """Leading x^2-pole coefficient at 0 by Richardson over x^2 U(x).

    For an even potential x^2 U = c + a x^2 + b x^4: three radii eliminate
    both corrections.
    """
    rs = np.asarray(radii, dtype=float)
    vals = np.array([complex(np.asarray(pot.value(rr))).real * rr ** 2
                     for rr in rs])
    A = np.column_stack([np.ones(3), rs ** 2, rs ** 4])
    return float(np.linalg.solve(A, vals)[0])


# ---------------------------------------------------------------------------
# degenerate closed-form catalog
# ---------------------------------------------------------------------------


def degenerate_catalog_check(c: float = 1.0, npts: int = 20):
    """Residuals of the closed-form eigenfunction triples of the degenerate
    one-gap limits:

    (a) U = 2c^2/sinh^2(cx), psi = 1/sinh(cx), lam = -c^2;
    (b) U = 2/x^2,           psi = 1/x,        lam = 0;
    (c) U = 2c^2/sin^2(cx),  psi = 1/sin(cx),  lam = c^2  (antiperiodic)
        and phi0 = cos(cx)/sin(cx), lam = 0 (periodic).

    All derivatives are analytic; residuals are relative to the local scale
    max(|psi''|, |U psi|).
    """
    out = {}
    xs = np.linspace(0.3, 3.0, npts)

    def resid(U, psi, ddpsi, lam, x):
        scale = np.maximum(np.abs(ddpsi(x)), np.abs(U(x) * psi(x)))
        return np.max(np.abs(-ddpsi(x) + U(x) * psi(x) - lam * psi(x))
                      / np.maximum(scale, 1.0))

    # (a) 1/sinh: psi'' = (2/sinh^2 + 1) * psi * c^2-scaled
    U = lambda x: 2 * c * c / np.sinh(c * x) ** 2
    psi = lambda x: 1.0 / np.sinh(c * x)
    ddpsi = lambda x: c * c * (2.0 / np.sinh(c * x) ** 3
                               + 1.0 / np.sinh(c * x))
    out["sinh"] = resid(U, psi, ddpsi, -c * c, xs)

    # (b) 1/x
    U = lambda x: 2.0 / x ** 2
    psi = lambda x: 1.0 / x
    ddpsi = lambda x: 2.0 / x ** 3
    out["rational"] = resid(U, psi, ddpsi, 0.0, xs)

    # (c) 1/sin and cot on (0, pi/c)
    xs_c = np.linspace(0.3, 2.8, npts) * (np.pi / c) / np.pi
    U = lambda x: 2 * c * c / np.sin(c * x) ** 2
    psi = lambda x: 1.0 / np.sin(c * x)
    ddpsi = lambda x: c * c * (2.0 / np.sin(c * x) ** 3
                               - 1.0 / np.sin(c * x))
    out["sin_antiperiodic"] = resid(U, psi, ddpsi, c * c, xs_c)

    psi2 = lambda x: np.cos(c * x) / np.sin(c * x)
    ddpsi2 = lambda x: c * c * 2.0 * np.cos(c * x) / np.sin(c * x) ** 3
    out["sin_periodic"] = resid(U, psi2, ddpsi2, 0.0, xs_c)
    return out
