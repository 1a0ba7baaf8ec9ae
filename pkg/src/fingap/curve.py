"""Real hyperelliptic spectral curves: divisors, the quasimomentum
differential dp, measures dmu, and the zone sign rules.

Conventions (fixed once, used everywhere):

* curve: w^2 = R(u) = prod_j (u - u_j), 2g+1 finite branch points;
* sheet +1 carries w(u) = prod_j sqrt(u - u_j + i0) (principal square
  roots), so w > 0 on the infinite zone [u_{2g}, oo);
* dp = N(u) du / (2 w), N monic of degree g with real roots p_k in the
  gaps, fixed by vanishing gap-cycle periods; with this normalisation
  dp -> dk (k = sqrt(u)) at infinity and dp/du > 0 on every zone of
  sheet +1;
* dmu = M(u) du / (2 w), M = prod over finite divisor points (u - alpha_j);
  r divisor points at infinity suppress r numerator factors;
* the quasimomentum p(u) is anchored at the lowest branch point,
  p(u_0) = 0, and is real on spectral zones with constant real part
  (plateaux) across gaps.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DivisorPointInsideZone,
    PathCrossesCut,
    RootOutsideGap,
    SingularLinearSystem,
)

__all__ = [
    "HyperellipticCurve",
    "Divisor",
    "QuasimomentumDifferential",
    "MeasureDifferential",
    "compute_dp",
    "quasimomentum",
    "cycle_period_check",
    "measure_for_divisor",
    "weight_ratio",
    "zone_sign",
    "intermediate_sign_assignment",
    "curve_to_json",
    "curve_from_json",
]

STRONG_REAL = "strong_real"
REAL_WITH_COMPLEX_PAIRS = "real_with_complex_pairs"
NON_REAL = "non_real"


def _is_real(v, scale=1.0):
    return abs(complex(v).imag) <= 1e-12 * max(abs(complex(v)), scale)


@dataclass(frozen=True)
class HyperellipticCurve:
    """Spectral curve w^2 = prod (u - u_j) with 2g+1 finite branch points."""

    branch_points: tuple
    reality_class: str = field(init=False)

    def __post_init__(self):
        pts = [complex(u) for u in self.branch_points]
        if len(pts) % 2 == 0:
            raise ValueError("need an odd number (2g+1) of branch points")
        for i, a in enumerate(pts):
            for b in pts[i + 1:]:
                if abs(a - b) < 1e-12 * max(abs(a), abs(b), 1.0):
                    raise ValueError("branch points must be pairwise distinct")
        if all(_is_real(v) for v in pts):
            vals = sorted(v.real for v in pts)
            object.__setattr__(self, "branch_points", tuple(vals))
            object.__setattr__(self, "reality_class", STRONG_REAL)
            return
        conj = sorted(pts, key=lambda v: (v.real, abs(v.imag), v.imag))
        mirrored = sorted([v.conjugate() for v in pts],
                          key=lambda v: (v.real, abs(v.imag), v.imag))
        scale = max(max(abs(v) for v in pts), 1.0)
        if max(abs(a - b) for a, b in zip(conj, mirrored)) < 1e-10 * scale:
            cls = REAL_WITH_COMPLEX_PAIRS
        else:
            cls = NON_REAL
        object.__setattr__(self, "branch_points", tuple(pts))
        object.__setattr__(self, "reality_class", cls)

    @property
    def genus(self) -> int:
        return (len(self.branch_points) - 1) // 2

    # -- real geometry (StrongReal only) ------------------------------------

    def _require_strong_real(self):
        if self.reality_class != STRONG_REAL:
            raise ValueError("operation requires a StrongReal curve")

    def zones(self):
        """Spectral zones [u_0,u_1], ..., plus the infinite zone (u_2g, inf)."""
        self._require_strong_real()
        u = self.branch_points
        out = [(u[2 * j], u[2 * j + 1]) for j in range(self.genus)]
        out.append((u[-1], np.inf))
        return out

    def gaps(self):
        """Open gaps (u_{2k-1}, u_{2k}), k = 1..g."""
        self._require_strong_real()
        u = self.branch_points
        return [(u[2 * k - 1], u[2 * k]) for k in range(1, self.genus + 1)]

    def R(self, u):
        u = np.asarray(u, dtype=complex)
        out = np.ones_like(u)
        for uj in self.branch_points:
            out = out * (u - uj)
        return out if out.ndim else complex(out)

    def sheet_w(self, u, sheet=+1):
        """w on the requested sheet with the +i0 product convention."""
        u = np.asarray(u, dtype=complex)
        out = np.ones_like(u)
        for uj in self.branch_points:
            out = out * np.sqrt(u - uj + 0j)
        out = sheet * out
        return out if out.ndim else complex(out)

    def zone_index(self, u) -> int:
        """Index of the zone containing real u, or -1 if u lies in a gap."""
        self._require_strong_real()
        u = float(u)
        for j, (a, b) in enumerate(self.zones()):
            if a <= u <= b:
                return j
        return -1


@dataclass(frozen=True)
class Divisor:
    """Degree-g divisor: finite points (alpha, sheet) plus r points at oo."""

    finite_points: tuple = ()
    at_infinity: int = 0

    def __post_init__(self):
        pts = tuple((complex(a), int(s)) for a, s in self.finite_points)
        for _, s in pts:
            if s not in (-1, 1):
                raise ValueError("sheet must be +1 or -1")
        if self.at_infinity < 0:
            raise ValueError("at_infinity must be >= 0")
        object.__setattr__(self, "finite_points", pts)

    @property
    def degree(self) -> int:
        return len(self.finite_points) + self.at_infinity

    def is_proper(self, curve: HyperellipticCurve) -> bool:
        """One finite point per gap and none at infinity (smooth potential)."""
        if self.at_infinity != 0 or self.degree != curve.genus:
            return False
        gaps = curve.gaps()
        used = [0] * len(gaps)
        for a, _ in self.finite_points:
            if not _is_real(a):
                return False
            hit = [k for k, (lo, hi) in enumerate(gaps)
                   if lo - 1e-12 <= a.real <= hi + 1e-12]
            if not hit:
                return False
            used[hit[0]] += 1
        return all(c == 1 for c in used)


# ---------------------------------------------------------------------------
# quadrature helpers for integrals with inverse-square-root endpoints
# ---------------------------------------------------------------------------


def _gauss_chebyshev(f, a, b, n=96):
    """Integral of f(u)/sqrt((u-a)(b-u)) over (a,b)."""
    theta = (2 * np.arange(1, n + 1) - 1) * np.pi / (2 * n)
    u = 0.5 * (a + b) + 0.5 * (b - a) * np.cos(theta)
    return np.pi / n * np.sum(f(u))


_GL_NODES = {}


def _gl(n):
    if n not in _GL_NODES:
        _GL_NODES[n] = np.polynomial.legendre.leggauss(n)
    return _GL_NODES[n]


def _gauss_legendre(f, a, b, n=96):
    x, w = _gl(n)
    u = 0.5 * (a + b) + 0.5 * (b - a) * x
    return 0.5 * (b - a) * np.sum(w * f(u))


def _integral_endpoint_sing(f, a, b, sing_left, sing_right, n=96):
    """Integral of f over (a,b) where f has inverse-square-root
    singularities at the flagged endpoints; substitutions u = a + s^2 or
    u = b - s^2 remove them.
    """
    if a == b:
        return 0.0
    if sing_left and sing_right:
        mid = 0.5 * (a + b)
        return (_integral_endpoint_sing(f, a, mid, True, False, n)
                + _integral_endpoint_sing(f, mid, b, False, True, n))
    if sing_left:
        smax = np.sqrt(b - a)
        return _gauss_legendre(lambda s: 2.0 * s * f(a + s * s), 0.0, smax, n)
    if sing_right:
        smax = np.sqrt(b - a)
        return _gauss_legendre(lambda s: 2.0 * s * f(b - s * s), 0.0, smax, n)
    return _gauss_legendre(f, a, b, n)


# ---------------------------------------------------------------------------
# dp
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuasimomentumDifferential:
    """dp = N(u) du/(2w) with monic N of degree g vanishing once per gap."""

    curve: HyperellipticCurve
    p_roots: tuple

    def numerator(self, u):
        u = np.asarray(u, dtype=complex)
        out = np.ones_like(u)
        for pk in self.p_roots:
            out = out * (u - pk)
        return out if out.ndim else complex(out)

    def du_coefficient(self, u, sheet=+1):
        """dp/du at (u, sheet)."""
        return self.numerator(u) / (2.0 * self.curve.sheet_w(u, sheet))

    def abs_density(self, u):
        """|N|/(2 sqrt|R|) -- the positive density dp/du on zones, sheet +1."""
        u = np.asarray(u, dtype=float)
        return np.abs(self.numerator(u)) / (2.0 * np.sqrt(np.abs(self.curve.R(u).real)))

    def gap_cycle_residuals(self):
        """|gap integrals of dp| after solving; should vanish."""
        out = []
        for (a, b) in self.curve.gaps():
            val = _gauss_chebyshev(
                lambda u: self.numerator(u).real / _sqrt_abs_others(self.curve, u, a, b),
                a, b)
            out.append(abs(val))
        return out


def _sqrt_abs_others(curve, u, a, b):
    """sqrt(|R|/((u-a)(b-u))) on the gap (a,b) -- the smooth factor."""
    u = np.asarray(u, dtype=float)
    out = np.ones_like(u)
    for uj in curve.branch_points:
        if uj == a or uj == b:
            continue
        out = out * np.abs(u - uj)
    return np.sqrt(out)


def compute_dp(curve: HyperellipticCurve) -> QuasimomentumDifferential:
    """Solve the g x g linear system of vanishing gap-cycle periods for the
    non-leading coefficients of the monic numerator N, and locate its roots.
    """
    curve._require_strong_real()
    g = curve.genus
    if g == 0:
        return QuasimomentumDifferential(curve, ())
    gaps = curve.gaps()
    M = np.zeros((g, g))
    rhs = np.zeros(g)
    for k, (a, b) in enumerate(gaps):
        for j in range(g):
            M[k, j] = _gauss_chebyshev(
                lambda u: u ** j / _sqrt_abs_others(curve, u, a, b), a, b)
        rhs[k] = -_gauss_chebyshev(
            lambda u: u ** g / _sqrt_abs_others(curve, u, a, b), a, b)
    try:
        cond = np.linalg.cond(M)
        if not np.isfinite(cond) or cond > 1e13:
            raise SingularLinearSystem(f"gap moment matrix cond={cond:.2e}")
        coeffs = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularLinearSystem(str(exc)) from exc
    poly = np.concatenate([[1.0], coeffs[::-1]])
    roots = np.roots(poly)
    span = curve.branch_points[-1] - curve.branch_points[0]
    if np.max(np.abs(roots.imag)) > 1e-8 * span:
        raise RootOutsideGap(f"complex numerator roots {roots}")
    roots = np.sort(roots.real)
    for pk, (a, b) in zip(roots, gaps):
        if not (a - 1e-8 * span <= pk <= b + 1e-8 * span):
            raise RootOutsideGap(f"root {pk} outside gap ({a}, {b})")
    return QuasimomentumDifferential(curve, tuple(roots))


# -- quasimomentum values ---------------------------------------------------


def _zone_integral(p_diff, a, b, sing_left, sing_right, n=96):
    return _integral_endpoint_sing(lambda u: p_diff.abs_density(u),
                                   a, b, sing_left, sing_right, n)


def _plateaux(p_diff):
    """Cumulative real plateau values: p at the edges of every zone.

    Returns a list of (left_edge_value, right_edge_value) per finite zone,
    anchored at p(u_0) = 0; crossing a gap keeps p constant.
    """
    curve = p_diff.curve
    vals = []
    acc = 0.0
    for (a, b) in curve.zones()[:-1]:
        inc = _zone_integral(p_diff, a, b, True, True)
        vals.append((acc, acc + inc))
        acc += inc
    return vals, acc  # acc = p at the bottom edge of the infinite zone


def quasimomentum(p_diff: QuasimomentumDifferential, u, sheet=+1):
    """p(u) on the requested sheet, anchored at p(lowest branch point) = 0.

    Real on spectral zones; for u in a gap the value is plateau + imaginary
    part. Complex u is reached by straight-line continuation from a real
    anchor on the infinite zone (PathCrossesCut if the segment comes too
    close to a branch point).
    """
    curve = p_diff.curve
    uc = complex(u)
    bp = curve.branch_points
    span = bp[-1] - bp[0] if len(bp) > 1 else 1.0
    if abs(uc.imag) <= 1e-14 * max(abs(uc), 1.0):
        ur = uc.real
        plat, acc = _plateaux(p_diff)
        zones = curve.zones()
        # infinite zone
        if ur >= bp[-1]:
            val = acc + _zone_integral(p_diff, bp[-1], ur, True, False)
            return sheet * val
        # finite zones: integrate from the nearer edge (both are branch
        # points, so the density is square-root singular there)
        for j, (a, b) in enumerate(zones[:-1]):
            if a <= ur <= b:
                if ur - a <= b - ur:
                    val = plat[j][0] + _zone_integral(p_diff, a, ur, True, False)
                else:
                    val = plat[j][1] - _zone_integral(p_diff, ur, b, False, True)
                return sheet * val
        # gaps: plateau + imaginary part
        for k, (a, b) in enumerate(curve.gaps()):
            if a < ur < b:
                f = lambda t: (p_diff.numerator(t)
                               / (2.0 * curve.sheet_w(t + 0j, +1))).imag
                im = _integral_endpoint_sing(
                    np.vectorize(lambda t: f(float(t))), a, ur, True, False)
                return sheet * (plat[k][1] + 1j * im)
        # below the spectrum: analytic continuation of the anchor zone
        f = lambda t: (p_diff.numerator(t) / (2.0 * curve.sheet_w(t + 0j, +1)))
        val = -_integral_endpoint_sing(
            np.vectorize(lambda t: f(float(t))), ur, bp[0], False, True)
        return sheet * val
    # complex u: continue from a real anchor right of all branch points
    anchor = bp[-1] + max(span, abs(uc - bp[-1]), 1.0)
    p_anchor = quasimomentum(p_diff, anchor, +1)
    nsteps = 400
    ts = np.linspace(0.0, 1.0, nsteps + 1)
    path = anchor + (uc - anchor) * ts
    for ujj in bp:
        d = np.min(np.abs(path - ujj))
        if d < 1e-6 * span:
            raise PathCrossesCut(f"segment passes branch point {ujj}")
    w = curve.sheet_w(anchor, +1)
    total = 0.0 + 0.0j
    prev = path[0]
    wprev = w
    for t in path[1:]:
        wraw = np.sqrt(curve.R(t))
        if abs(wraw - wprev) > abs(-wraw - wprev):
            wraw = -wraw
        mid_num = p_diff.numerator(0.5 * (prev + t))
        wmid = 0.5 * (wprev + wraw)
        total += mid_num / (2.0 * wmid) * (t - prev)
        prev, wprev = t, wraw
    return sheet * (p_anchor + total)


def cycle_period_check(p_diff: QuasimomentumDifferential, period: float):
    """T * (zone increments of p) / pi -- integers iff e^{iTp} single-valued.

    The b-type cycle over finite zone j carries period 2 * increment_j, so
    single-valuedness requires T*increment_j to be a multiple of pi.
    """
    plat, _ = _plateaux(p_diff)
    out = []
    for (lo, hi) in plat:
        out.append(period * (hi - lo) / np.pi)
    return out


# ---------------------------------------------------------------------------
# dmu and signs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MeasureDifferential:
    """dmu = prod_j (u - alpha_j) du/(2w); r divisor points at infinity
    reduce the numerator degree to g - r."""

    curve: HyperellipticCurve
    alpha_roots: tuple
    at_infinity: int

    def numerator(self, u):
        u = np.asarray(u, dtype=complex)
        out = np.ones_like(u)
        for ak in self.alpha_roots:
            out = out * (u - ak)
        return out if out.ndim else complex(out)

    def du_coefficient(self, u, sheet=+1):
        return self.numerator(u) / (2.0 * self.curve.sheet_w(u, sheet))


def measure_for_divisor(curve: HyperellipticCurve,
                        divisor: Divisor) -> MeasureDifferential:
    if divisor.degree != curve.genus:
        raise ValueError(
            f"divisor degree {divisor.degree} != genus {curve.genus}")
    alphas = tuple(a for a, _ in divisor.finite_points)
    return MeasureDifferential(curve, alphas, divisor.at_infinity)


def weight_ratio(p_diff: QuasimomentumDifferential,
                 measure: MeasureDifferential, u):
    """dp/dmu as the ratio of numerators (sheet independent)."""
    return p_diff.numerator(u) / measure.numerator(u)


def zone_sign(p_diff: QuasimomentumDifferential,
              measure: MeasureDifferential, zone_index: int) -> int:
    """Sign of dp/dmu on zone `zone_index` (0..g; g = infinite zone)."""
    curve = p_diff.curve
    zones = curve.zones()
    a, b = zones[zone_index]
    if np.isinf(b):
        samples = a + 1.0 + np.arange(5) * 0.7
    else:
        samples = a + (b - a) * np.linspace(0.15, 0.85, 5)
    for alpha in measure.alpha_roots:
        if _is_real(alpha) and not np.isinf(b):
            if a + 1e-10 < alpha.real < b - 1e-10:
                raise DivisorPointInsideZone(
                    f"divisor point {alpha} inside zone ({a},{b})")
        elif _is_real(alpha) and np.isinf(b) and alpha.real > a + 1e-10:
            raise DivisorPointInsideZone(
                f"divisor point {alpha} inside the infinite zone")
    vals = np.real(weight_ratio(p_diff, measure, samples))
    signs = np.sign(vals)
    if not np.all(signs == signs[0]) or signs[0] == 0:
        raise DivisorPointInsideZone(
            f"dp/dmu changes sign inside zone {zone_index}")
    return int(signs[0])


def intermediate_sign_assignment(g: int, occupied_gaps) -> list:
    """Zone signs by the leftward walk: start + on the infinite zone, flip
    when crossing an empty gap, keep when crossing an occupied gap.

    Returns [sign(zone 0), ..., sign(zone g)] (zone g = infinite).
    """
    occupied = set(int(k) for k in occupied_gaps)
    if not occupied.issubset(set(range(1, g + 1))):
        raise ValueError(f"occupied gaps must lie in 1..{g}")
    signs = [0] * (g + 1)
    signs[g] = 1
    for k in range(g, 0, -1):
        # gap k separates zone k (right) from zone k-1 (left)
        signs[k - 1] = signs[k] if k in occupied else -signs[k]
    return signs


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def curve_to_json(curve: HyperellipticCurve, divisor: Divisor = None) -> str:
    data = {"branch_points": [[complex(u).real, complex(u).imag]
                              for u in curve.branch_points]}
    if divisor is not None:
        data["divisor"] = {
            "finite": [[a.real, a.imag, s] for a, s in divisor.finite_points],
            "at_infinity": divisor.at_infinity,
        }
    return json.dumps(data, indent=2)


def curve_from_json(text: str):
    data = json.loads(text)
    pts = [complex(re, im) for re, im in data["branch_points"]]
    curve = HyperellipticCurve(tuple(pts))
    divisor = None
    if "divisor" in data:
        fin = tuple((complex(re, im), int(s))
                    for re, im, s in data["divisor"]["finite"])
        divisor = Divisor(fin, int(data["divisor"]["at_infinity"]))
    return curve, divisor
