"""Indefinite inner products on the real contour: Bloch point sets at fixed
multiplier, periodic Gram matrices, negative-square counting, and the
spectral transform pair built on the Bloch basis.

The periodic Gram identity reads

    integral_0^T Psi(x, z_j) Psi*(x, z_k) dx = delta_jk * T * dp/dmu(z_j)

for canonically paired solutions sharing the Bloch multiplier; the x-path
is lifted by i*delta past the real poles, and the value is delta-independent
because the pair product has zero residue there.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .curve import quasimomentum
from .errors import DecayTooSlow, MultiplierMismatch, ZeroWeight

__all__ = [
    "BlochPointSet",
    "SignatureReport",
    "bloch_points",
    "lifted_period_quadrature",
    "periodic_gram",
    "gram_matrix",
    "negative_square_count",
    "ba_fourier_forward",
    "ba_fourier_inverse",
    "hermitian_x_square",
    "sinh_degenerate_signature",
]


# ---------------------------------------------------------------------------
# quadrature over one period on the lifted line
# ---------------------------------------------------------------------------


_GAUSS_CACHE = {}


def _gauss(n):
    if n not in _GAUSS_CACHE:
        _GAUSS_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GAUSS_CACHE[n]


def _pole_graded_edges(a, b, delta, poles, ratio=2.0):
    """Panel edges on [a, b] geometrically refined toward every pole."""
    cuts = {a, b}
    for p in poles:
        if p < a - 1e-12 or p > b + 1e-12:
            continue
        h = delta
        for sgn in (-1.0, 1.0):
            t = p
            h = delta
            while True:
                t = t + sgn * h
                if t <= a + 1e-14 or t >= b - 1e-14:
                    break
                near = min(abs(t - q) for q in poles if q != p) if \
                    len(poles) > 1 else np.inf
                if near < h:
                    break
                cuts.add(t)
                h *= ratio
        if a < p < b:
            cuts.add(p)
    return np.array(sorted(cuts))


def lifted_period_quadrature(f, T, delta, order=16, x0=0.0, poles=None):
    """integral_{x0}^{x0+T} f(t + i*delta) dt with panels geometrically
    graded toward every real pole under the path (default: the endpoints,
    matching one-period windows of potentials with poles at multiples of T).
    """
    xg, wg = _gauss(order)
    if poles is None:
        poles = (x0, x0 + T)
    edges = _pole_graded_edges(x0, x0 + T, delta, sorted(poles))
    total = 0.0 + 0.0j
    for a, b in zip(edges[:-1], edges[1:]):
        t = 0.5 * (a + b) + 0.5 * (b - a) * xg
        total += 0.5 * (b - a) * np.sum(wg * f(t + 1j * delta))
    return total


# ---------------------------------------------------------------------------
# Bloch point sets
# ---------------------------------------------------------------------------


@dataclass
class BlochPoint:
    u: float
    sheet: int
    zone: int           # 0..g, g = infinite zone
    p: float            # quasimomentum value (real on zones)
    weight: float       # dp/dmu


@dataclass
class BlochPointSet:
    kappa: complex
    period: float
    points: list = field(default_factory=list)
    u_max: float = None

    def weights(self):
        return np.array([pt.weight for pt in self.points])


@dataclass
class SignatureReport:
    kappa: complex
    q_negative: int
    per_zone: dict
    zero_weight_points: list = field(default_factory=list)

    def to_json_dict(self):
        return {
            "kappa": [self.kappa.real, self.kappa.imag],
            "q_negative": self.q_negative,
            "per_zone": {str(k): v for k, v in self.per_zone.items()},
            "zero_weight_points": self.zero_weight_points,
        }


def bloch_points(family, kappa, u_max, include_sheets=(1, -1)) -> BlochPointSet:
    """All curve points with e^{iTp} = kappa on the real contour up to u_max.

    Finite zones are searched exhaustively; the infinite zone up to u_max.
    ``family`` provides the curve, quasimomentum and dp/dmu weights (for the
    one-gap sigma family both routes agree; the search itself uses the
    curve-module quadrature values).
    """
    kappa = complex(kappa)
    if abs(abs(kappa) - 1.0) > 1e-10:
        raise ValueError("Bloch multiplier must be unimodular")
    theta = float(np.angle(kappa)) % (2 * np.pi)
    T = family.period
    curve = family.curve
    p_diff = family.p_diff
    out = BlochPointSet(kappa, T, u_max=float(u_max))
    zones = curve.zones()
    for zi, (a, b) in enumerate(zones):
        b_eff = min(b, u_max) if np.isinf(b) else b
        if b_eff <= a:
            continue
        # p is increasing on every zone of sheet +1
        pa = quasimomentum(p_diff, a, +1).real
        pb = quasimomentum(p_diff, b_eff, +1).real
        for sheet in include_sheets:
            # on sheet -1 the values are negated
            lo, hi = (pa, pb) if sheet == 1 else (-pb, -pa)
            m0 = int(np.ceil((T * lo - theta) / (2 * np.pi) - 1e-12))
            m1 = int(np.floor((T * hi - theta) / (2 * np.pi) + 1e-12))
            for m in range(m0, m1 + 1):
                target = (theta + 2 * np.pi * m) / T
                if sheet == -1:
                    target = -target

                def fn(u):
                    return quasimomentum(p_diff, u, +1).real - target

                va, vb = pa - target, pb - target
                if va == 0.0:
                    root = a
                elif vb == 0.0:
                    root = b_eff
                elif va * vb < 0:
                    root = brentq(fn, a, b_eff, xtol=1e-13, rtol=1e-15)
                else:
                    continue
                z = family.point(root, sheet)
                wt = float(np.real(family.dp_over_dmu(z)))
                out.points.append(BlochPoint(float(root), sheet, zi,
                                             sheet * abs(target), wt))
    # drop sheet duplicates at band edges (p = 0 or pi/T plateaux hit both
    # sheets at the same branch point)
    seen = []
    unique = []
    for pt in sorted(out.points, key=lambda q: (q.u, -q.sheet)):
        if any(abs(pt.u - s.u) < 1e-9 * max(1.0, abs(pt.u)) and
               abs((pt.p - s.p) % (2 * np.pi / T)) < 1e-9 for s in seen):
            continue
        seen.append(pt)
        unique.append(pt)
    out.points = sorted(unique, key=lambda q: q.u)
    return out


def negative_square_count(point_set: BlochPointSet,
                          zero_tol: float = 1e-10) -> SignatureReport:
    """Count of Bloch points with negative dp/dmu weight, with the per-zone
    occupancy table; boundary points with vanishing weight are reported
    separately and not counted."""
    per_zone = {}
    q = 0
    zeros = []
    for pt in point_set.points:
        scale = max(abs(pt.u), 1.0)
        if abs(pt.weight) < zero_tol * scale:
            zeros.append(pt.u)
            continue
        key = pt.zone
        per_zone.setdefault(key, {"count": 0, "negative": 0})
        per_zone[key]["count"] += 1
        if pt.weight < 0:
            per_zone[key]["negative"] += 1
            q += 1
    return SignatureReport(point_set.kappa, q, per_zone, zeros)


# ---------------------------------------------------------------------------
# periodic Gram matrix
# ---------------------------------------------------------------------------


def periodic_gram(family, zj, zk, delta=None, order=16):
    """One Gram entry: integral over a lifted period of
    Psi(x, z_j) Psi*(x, z_k); requires matching multipliers."""
    T = family.period
    delta = 0.01 * T if delta is None else delta
    sj = family.solution(zj)
    dk = family.dual(zk)
    if hasattr(sj, "multiplier"):
        kj = sj.multiplier
        kk = family.solution(zk).multiplier
        if abs(kj - kk) > 1e-6 * max(abs(kj), 1.0):
            raise MultiplierMismatch(
                f"multipliers {kj:.6f} vs {kk:.6f} differ")
    return lifted_period_quadrature(
        lambda x: sj.psi(x) * dk.psi(x), T, delta, order=order)


def gram_matrix(family, points, delta=None, order=16):
    pts = list(points)
    n = len(pts)
    G = np.empty((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            G[i, j] = periodic_gram(family, pts[i], pts[j], delta=delta,
                                    order=order)
    return G


def hermitian_x_square(family, z, delta=None):
    """<psi, psi> over one period: equals T * dp/dmu(z) for points on the
    real contour (the Hermitian and bilinear products coincide there)."""
    return periodic_gram(family, z, z, delta=delta)


def sinh_degenerate_signature(c: float = 1.0, window: float = 12.0,
                              delta: float = 0.02, kvals=(0.7, 1.3, 2.4)):
    """Whole-line signature data for U = 2c^2/sinh^2(cx).

    Returns the Hermitian square of the bound state 1/sinh(cx) at
    lambda = -c^2 (negative: the single negative square) and windowed
    squares of sample scattering states (all positive). The bound-state
    integral has the closed form -2 coth(cL)/c -> -2/c.
    """
    L = window
    bound = lifted_period_quadrature(
        lambda x: 1.0 / np.sinh(c * x) ** 2, 2 * L, delta, x0=-L, poles=[0.0])
    scatter = []
    for k in kvals:
        def f(x, k=k):
            g = 1j * k - c / np.tanh(c * x)
            gbar = -1j * k - c / np.tanh(c * x)
            return g * gbar
        scatter.append(complex(lifted_period_quadrature(
            f, 2 * L, delta, x0=-L, poles=[0.0])))
    return {
        "bound_square": complex(bound),
        "bound_square_exact": -2.0 / np.tanh(c * L) / c,
        "scatter_squares": scatter,
        "negative_count": int(np.real(bound) < 0),
    }


# ---------------------------------------------------------------------------
# spectral transform pair on the Bloch basis
# ---------------------------------------------------------------------------


def _decay_guard(phi_samples, kvals, eps=0.25):
    """Samples on the infinite component must decay faster than k^{-1+eps}."""
    phi = np.abs(np.asarray(phi_samples, dtype=complex))
    k = np.asarray(kvals, dtype=float)
    mask = (k > 0) & (phi > 0)
    if mask.sum() < 4:
        return
    kk, pp = np.log(k[mask]), np.log(phi[mask])
    slope = np.polyfit(kk, pp, 1)[0]
    if slope > -1.0 + eps:
        raise DecayTooSlow(f"contour samples decay like k^{slope:.2f}")


@dataclass
class ContourGrid:
    """Quadrature grid on the real contour: curve points with ORIENTED du
    weights (the contour is oriented by increasing quasimomentum, so the
    sheet -1 pieces carry negative du)."""
    points: list
    du_weights: np.ndarray

    @classmethod
    def on_zone(cls, family, a, b, n=200, sheets=(1, -1)):
        """Gauss-Legendre grid over a zone segment [a, b], both sheets."""
        xg, wg = _gauss(n if n <= 64 else 64)
        pieces_pts = []
        pieces_w = []
        nper = max(1, int(np.ceil(n / 64)))
        edges = np.linspace(a, b, nper + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            u = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xg
            w = 0.5 * (hi - lo) * wg
            for sheet in sheets:
                for ui, wi in zip(u, w):
                    pieces_pts.append(family.point(ui, sheet))
                    pieces_w.append(sheet * wi)
        return cls(pieces_pts, np.asarray(pieces_w))

    @classmethod
    def on_infinite_zone(cls, family, u_edge, u_max, n=200, sheets=(1, -1)):
        """Grid over [u_edge, u_max] in the edge variable s = sqrt(u - edge)
        (removes the band-edge square-root of the measure; for the free
        family this is exactly the k-line grid)."""
        xg, wg = _gauss(64)
        smax = np.sqrt(u_max - u_edge)
        pieces_pts = []
        pieces_w = []
        nper = max(1, int(np.ceil(n / 64)))
        edges = np.linspace(0.0, smax, nper + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            s = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xg
            w = 0.5 * (hi - lo) * wg
            for sheet in sheets:
                for si, wi in zip(s, w):
                    if si == 0.0:
                        continue
                    pieces_pts.append(family.point(u_edge + si * si, sheet))
                    pieces_w.append(sheet * 2.0 * si * wi)
        return cls(pieces_pts, np.asarray(pieces_w))

    @classmethod
    def on_finite_zone(cls, family, a, b, n=128, sheets=(1, -1)):
        """Grid over a finite zone with edge substitutions at both ends."""
        xg, wg = _gauss(max(16, n // 4))
        mid = 0.5 * (a + b)
        pieces_pts = []
        pieces_w = []
        for (edge, lo, hi, orient) in ((a, 0.0, np.sqrt(mid - a), 1.0),
                                       (b, 0.0, np.sqrt(b - mid), -1.0)):
            s = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xg
            w = 0.5 * (hi - lo) * wg
            for sheet in sheets:
                for si, wi in zip(s, w):
                    if si == 0.0:
                        continue
                    u = edge + orient * si * si
                    pieces_pts.append(family.point(u, sheet))
                    pieces_w.append(sheet * orient * 2.0 * si * wi)
        return cls(pieces_pts, np.asarray(pieces_w))


def ba_fourier_forward(family, phi_values, grid: ContourGrid, x_grid,
                       check_decay=True):
    """x-space synthesis: phi_tilde(x) = (2pi)^{-1/2} * sum over the contour
    of phi(z) Psi*(x, z) dmu(z).

    ``x_grid`` may be complex (the pole-avoidance rule lifts windows that
    cross potential poles into the upper half-plane).
    """
    phi = np.asarray(phi_values, dtype=complex)
    if check_decay:
        ks = [np.sqrt(abs(pt.u)) for pt in grid.points]
        _decay_guard(phi, ks)
    x_grid = np.asarray(x_grid, dtype=complex)
    out = np.zeros(len(x_grid), dtype=complex)
    for val, pt, duw in zip(phi, grid.points, grid.du_weights):
        if val == 0.0:
            continue
        dmu = family.measure_du(pt) * duw
        out += val * family.dual(pt).psi(x_grid) * dmu
    return out / np.sqrt(2 * np.pi)


def _simpson_weights(x):
    n = len(x)
    h = x[1] - x[0]
    if n % 2 == 1:
        w = np.ones(n)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return w * h / 3.0
    w = np.gradient(x)
    return w


def ba_fourier_inverse(family, f_values, x_grid, grid: ContourGrid):
    """Contour analysis: phi(z) = (2pi)^{-1/2} integral f(x) Psi(x, z) dx
    over the (truncated) x-window given by the x_grid samples (composite
    Simpson along the possibly lifted line)."""
    x = np.asarray(x_grid, dtype=complex)
    f = np.asarray(f_values, dtype=complex)
    w = _simpson_weights(x.real)
    out = np.empty(len(grid.points), dtype=complex)
    for i, pt in enumerate(grid.points):
        psi = family.solution(pt).psi(x)
        out[i] = np.sum(f * psi * w)
    return out / np.sqrt(2 * np.pi)
