"""Weierstrass elliptic functions and the lattice <-> branch-point dictionary.

Evaluation goes through theta quotients with argument reduction to the
fundamental cell; a truncated lattice sum (`wp_lattice_sum`) provides an
independent cross-check oracle.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import elliprf

from ._core import kernels, reference
from .errors import BranchPointsNotSorted, LatticeDegenerate, PoleProximity

__all__ = [
    "Lattice",
    "wp",
    "wp_prime",
    "zeta_fn",
    "sigma_fn",
    "wp_family",
    "lattice_from_roots",
    "lattice_from_branch_points",
    "wp_lattice_sum",
]


@dataclass(frozen=True)
class Lattice:
    """Period lattice with half-periods omega1, omega2 (Im(omega2/omega1)>0).

    Derived invariants g2, g3 and branch values e1 = wp(omega1),
    e2 = wp(omega1+omega2), e3 = wp(omega2) are computed at construction.
    ``u_shift`` carries the affine shift s when the lattice was built from
    branch points u_i = e_i + s.
    """

    omega1: complex
    omega2: complex
    u_shift: float | None = None
    params: np.ndarray = field(init=False, repr=False, compare=False)
    e1: complex = field(init=False, compare=False)
    e2: complex = field(init=False, compare=False)
    e3: complex = field(init=False, compare=False)
    g2: complex = field(init=False, compare=False)
    g3: complex = field(init=False, compare=False)

    def __post_init__(self):
        w1 = complex(self.omega1)
        w2 = complex(self.omega2)
        if w1 == 0 or (w2 / w1).imag <= 0:
            raise LatticeDegenerate(
                f"Im(omega2/omega1) <= 0 for omega1={w1}, omega2={w2}")
        object.__setattr__(self, "params", reference.lattice_params(w1, w2))
        e1 = self._wp_raw(w1)
        e2 = self._wp_raw(w1 + w2)
        e3 = self._wp_raw(w2)
        object.__setattr__(self, "e1", e1)
        object.__setattr__(self, "e2", e2)
        object.__setattr__(self, "e3", e3)
        object.__setattr__(self, "g2", -4.0 * (e1 * e2 + e2 * e3 + e3 * e1))
        object.__setattr__(self, "g3", 4.0 * e1 * e2 * e3)

    def _wp_raw(self, z):
        w, _, _, _ = reference.wp_family(complex(z), self.params)
        return w

    @property
    def eta1(self) -> complex:
        return complex(self.params[2])

    @property
    def eta2(self) -> complex:
        return complex(self.params[3])

    @property
    def shortest_vector(self) -> float:
        w1, w2 = 2 * self.omega1, 2 * self.omega2
        return min(abs(w1), abs(w2), abs(w1 + w2), abs(w1 - w2))

    @property
    def pole_eps(self) -> float:
        return 1e-6 * self.shortest_vector

    @property
    def is_rectangular(self) -> bool:
        return (abs(complex(self.omega1).imag) < 1e-12 * abs(self.omega1)
                and abs(complex(self.omega2).real) < 1e-12 * abs(self.omega2))

    def real_period(self) -> float:
        """Smallest positive real lattice vector (period of wp on the line)."""
        best = np.inf
        w1, w2 = 2 * complex(self.omega1), 2 * complex(self.omega2)
        for m in range(-4, 5):
            for n in range(-4, 5):
                v = m * w1 + n * w2
                if abs(v.imag) < 1e-10 * max(abs(v), 1.0) and v.real > 1e-12:
                    best = min(best, v.real)
        if not np.isfinite(best):
            raise LatticeDegenerate("lattice contains no real period")
        return best

    def imaginary_shift(self) -> float:
        """Height omega with x + i*omega the nonsingular midline."""
        if self.is_rectangular:
            return complex(self.omega2).imag
        # rhombic: half the imaginary extent of the complex generator
        return abs(complex(self.omega2).imag)


def _check_pole(z, lat: Lattice, eps=None):
    eps = lat.pole_eps if eps is None else eps
    d = reference.nearest_lattice_distance(np.asarray(z, dtype=complex),
                                           lat.params)
    if np.any(np.asarray(d) < eps):
        raise PoleProximity(f"argument within {eps:g} of a lattice point")


def wp_family(z, lat: Lattice, check_pole: bool = True):
    """(wp, wp', zeta, sigma) at z; z may be scalar or array."""
    if check_pole:
        _check_pole(z, lat)
    z = np.asarray(z, dtype=complex)
    if z.ndim == 0:
        return kernels.wp_family(complex(z), lat.params)
    return reference.wp_family(z, lat.params)


def wp(x, lat: Lattice):
    """Weierstrass elliptic function wp(x)."""
    return wp_family(x, lat)[0]


def wp_prime(x, lat: Lattice):
    """Derivative wp'(x); satisfies wp'^2 = 4wp^3 - g2 wp - g3."""
    return wp_family(x, lat)[1]


def zeta_fn(x, lat: Lattice):
    """Weierstrass zeta; zeta' = -wp, odd, quasi-periodic with eta1/eta2."""
    return wp_family(x, lat)[2]


def sigma_fn(x, lat: Lattice):
    """Weierstrass sigma (entire, sigma(x)/x -> 1 at 0)."""
    return wp_family(x, lat, check_pole=False)[3]


# ---------------------------------------------------------------------------
# lattice construction from cubic roots / branch points
# ---------------------------------------------------------------------------


def _half_period_for_root(ea, eb, ec):
    """Half period h with wp(h) = ea, via the Carlson symmetric integral."""
    return complex(elliprf(0.0, complex(ea - eb), complex(ea - ec)))


def _validated(omega1, omega2, roots, u_shift=None, tol=1e-8):
    lat = Lattice(omega1, omega2, u_shift=u_shift)
    got = [lat.e1, lat.e2, lat.e3]
    want = [complex(r) for r in roots]
    scale = max(max(abs(v) for v in want), 1.0)
    err = 0.0
    for w in want:
        j = int(np.argmin([abs(g - w) for g in got]))
        err = max(err, abs(got.pop(j) - w))
    if err > tol * scale:
        return None
    return lat


def lattice_from_roots(roots, u_shift=None) -> Lattice:
    """Lattice whose branch values {e_i} equal the given cubic roots.

    Roots must sum to zero (Weierstrass normalisation) and be either all
    real distinct or one real plus a complex-conjugate pair.
    """
    r = [complex(v) for v in roots]
    if len(r) != 3:
        raise ValueError("need exactly three roots")
    if abs(sum(r)) > 1e-9 * max(max(abs(v) for v in r), 1.0):
        raise ValueError("roots must sum to zero")
    reals = [v for v in r if abs(v.imag) <= 1e-12 * max(abs(v), 1.0)]
    if len(reals) == 3:
        e3, e2, e1 = sorted(v.real for v in r)
        w1 = _half_period_for_root(e1, e2, e3)
        w2 = 1j * complex(elliprf(0.0, e1 - e3, e2 - e3))
        lat = _validated(w1, w2, r, u_shift)
        if lat is not None:
            return lat
        raise LatticeDegenerate("rectangular period construction failed")
    if len(reals) != 1:
        raise ValueError("roots must be all real or contain a conjugate pair")
    ereal = reals[0]
    eplus = next(v for v in r if v.imag > 0)
    hc = _half_period_for_root(eplus, ereal, eplus.conjugate())
    for cand in (hc, -hc, hc.conjugate(), -hc.conjugate()):
        if cand.imag <= 0 or abs(cand.real) < 1e-14:
            continue
        w2 = cand
        w1 = cand.conjugate()
        if (w2 / w1).imag <= 0:
            continue
        lat = _validated(w1, w2, r, u_shift)
        if lat is not None:
            return lat
    raise LatticeDegenerate("rhombic period construction failed")


def lattice_from_branch_points(u0, u1, u2) -> Lattice:
    """Lattice of the curve w^2 = (u-u0)(u-u1)(u-u2) under u = wp + s.

    The shift s = (u0+u1+u2)/3 recentres the cubic to Weierstrass form;
    the factor 4 of wp'^2 = 4 prod(wp - e_i) is absorbed into the sheet
    coordinate w = wp'/2. Real triples must be strictly sorted; a complex
    conjugate pair plus one real point yields the rhombic lattice.
    """
    pts = [complex(u0), complex(u1), complex(u2)]
    n_real = sum(abs(v.imag) <= 1e-12 * max(abs(v), 1.0) for v in pts)
    s = sum(pts) / 3.0
    if n_real == 3:
        vals = [v.real for v in pts]
        if not (vals[0] < vals[1] < vals[2]):
            raise BranchPointsNotSorted(f"expect u0<u1<u2, got {vals}")
        s = s.real
    return lattice_from_roots([v - s for v in pts],
                              u_shift=float(s.real) if n_real == 3 else s)


# ---------------------------------------------------------------------------
# independent oracle: truncated lattice sum with Richardson tail removal
# ---------------------------------------------------------------------------


def wp_lattice_sum(x, lat: Lattice, radius: float = 500.0):
    """wp(x) by direct summation over lattice points within three radii,
    Richardson-extrapolated in 1/R^2 and 1/R^4 to remove the smooth tail.

    Slowly convergent by construction -- used only as a cross-check oracle.
    """
    x0, _, _ = reference._reduce(np.atleast_1d(complex(x)), lat.params)
    x = complex(x0[0])
    w1, w2 = 2 * complex(lat.omega1), 2 * complex(lat.omega2)
    radii = radius * np.array([1.0, 2 ** 0.5, 2.0, 2 * 2 ** 0.5])
    rmax = radii[-1]
    span = int(np.ceil(rmax / min(abs(w1), abs(w2)))) + 2
    m, n = np.meshgrid(np.arange(-span, span + 1), np.arange(-span, span + 1),
                       indexing="ij")
    lam = m * w1 + n * w2
    mask0 = (m == 0) & (n == 0)
    absl = np.abs(lam)
    terms = np.zeros_like(lam)
    np.divide(1.0, (x - lam) ** 2, out=terms, where=~mask0)
    corr = np.zeros_like(lam)
    np.divide(1.0, lam ** 2, out=corr, where=~mask0)
    contrib = terms - corr
    partial = []
    for R in radii:
        sel = (~mask0) & (absl <= R)
        partial.append(1.0 / x ** 2 + contrib[sel].sum())
    # tail(R) ~ c2/R^2 + c4/R^4 + c6/R^6: eliminate all three
    s = np.array(partial)
    A = np.column_stack([np.ones(4), radii ** -2.0, radii ** -4.0,
                         radii ** -6.0])
    coef = np.linalg.solve(A, s)
    return complex(coef[0])
