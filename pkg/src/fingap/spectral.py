"""Transfer-matrix integration of -psi'' + U(x) psi = u psi along
pole-avoiding paths, monodromy half-trace, band edges and the
Dirichlet-type spectrum of the singular problem on one period.
"""

import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from ._core import kernels
from .elliptic import Lattice
from .errors import (
    FrobeniusSeriesDivergence,
    PathTooCloseToPole,
    RootClusterUnresolved,
    StepSizeUnderflow,
)

__all__ = [
    "Potential",
    "free_potential",
    "lame_potential",
    "shifted_lame_potential",
    "sinh_potential",
    "sin_potential",
    "inverse_square_potential",
    "callable_potential",
    "lame_potential_from_branch_points",
    "TransferMatrix",
    "SpectrumReport",
    "integrate_transfer",
    "monodromy_trace",
    "trace_derivative",
    "find_band_edges",
    "find_hermit_spectrum",
    "dirichlet_shooting_oracle",
    "local_even_expansion",
]

DET_TOL = 1e-8


@dataclass(frozen=True)
class Potential:
    """Periodic (or degenerate-limit) potential for -d^2/dx^2 + U(x).

    ``real_poles`` lists (position in [0, period), coefficient m(m+1)) of
    the second-order poles on the real line, one entry per period.
    """

    kind: str
    period: float | None = None
    n: int = 0
    lattice: Lattice | None = None
    offset: float = 0.0
    c: float = 1.0
    coeff: float = 0.0
    func: object = None
    real_poles: tuple = ()
    label: str = ""

    def value(self, x):
        """U(x) for complex scalar or array x."""
        code, strength, offset, shift, cpar, params, func = self._kernel_args()
        x = np.asarray(x, dtype=complex)
        if self.kind in ("lame", "shifted_lame"):
            from .elliptic import wp_family
            w = wp_family(x + shift, self.lattice, check_pole=False)
            w = w[0]
            return strength * w + offset
        if x.ndim == 0:
            from ._core import reference
            return reference.potential_value(complex(x), code, strength,
                                             offset, shift, cpar, params, func)
        from ._core import reference
        return np.array([reference.potential_value(complex(v), code, strength,
                                                   offset, shift, cpar, params,
                                                   func)
                         for v in x.ravel()]).reshape(x.shape)

    def _kernel_args(self):
        params = (self.lattice.params if self.lattice is not None
                  else np.zeros(5, dtype=complex))
        if self.kind == "free":
            return (kernels.POT_FREE, 0j, complex(self.offset), 0j, 0j,
                    params, None)
        if self.kind == "lame":
            return (kernels.POT_WP, complex(self.n * (self.n + 1)),
                    complex(self.offset), 0j, 0j, params, None)
        if self.kind == "shifted_lame":
            shift = 1j * self.lattice.imaginary_shift()
            return (kernels.POT_WP, complex(self.n * (self.n + 1)),
                    complex(self.offset), shift, 0j, params, None)
        if self.kind == "sinh":
            return (kernels.POT_SINH, 0j, complex(self.offset), 0j,
                    complex(self.c), params, None)
        if self.kind == "sin":
            return (kernels.POT_SIN, 0j, complex(self.offset), 0j,
                    complex(self.c), params, None)
        if self.kind == "inverse_square":
            return (kernels.POT_INVSQ, complex(self.coeff),
                    complex(self.offset), 0j, 0j, params, None)
        if self.kind == "callable":
            return (kernels.POT_CALL, 0j, 0j, 0j, 0j, params, self.func)
        raise ValueError(f"unknown potential kind {self.kind!r}")

    def pole_positions(self, a: float, b: float):
        """All real pole positions in [a, b] (periodic extension)."""
        if not self.real_poles or self.period is None:
            return [p for p, _ in self.real_poles if a <= p <= b]
        out = []
        T = self.period
        for p0, _ in self.real_poles:
            k0 = int(np.floor((a - p0) / T)) - 1
            k1 = int(np.ceil((b - p0) / T)) + 1
            out.extend(p0 + k * T for k in range(k0, k1 + 1)
                       if a - 1e-12 <= p0 + k * T <= b + 1e-12)
        return sorted(out)


def free_potential(period: float = np.pi, offset: float = 0.0) -> Potential:
    return Potential("free", period=period, offset=offset, label="U=0")


def lame_potential(n: int, lattice: Lattice, offset: float = 0.0) -> Potential:
    """U(x) = n(n+1) wp(x) + offset: one double pole per period at x = 0."""
    return Potential("lame", period=lattice.real_period(), n=n,
                     lattice=lattice, offset=offset,
                     real_poles=((0.0, n * (n + 1)),),
                     label=f"{n*(n+1)}wp(x)+{offset:g}")


def shifted_lame_potential(n: int, lattice: Lattice,
                           offset: float = 0.0) -> Potential:
    """U(x) = n(n+1) wp(x + i omega) + offset: smooth on the real line."""
    return Potential("shifted_lame", period=lattice.real_period(), n=n,
                     lattice=lattice, offset=offset,
                     label=f"{n*(n+1)}wp(x+iw)+{offset:g}")


def sinh_potential(c: float = 1.0) -> Potential:
    """U = 2c^2/sinh^2(cx): aperiodic degeneration, single pole at 0."""
    return Potential("sinh", period=None, c=c, real_poles=((0.0, 2.0),),
                     label=f"2c^2/sinh^2, c={c:g}")


def sin_potential(c: float = 1.0) -> Potential:
    """U = 2c^2/sin^2(cx): degenerate one-gap limit, period pi/c."""
    return Potential("sin", period=np.pi / c, c=c, real_poles=((0.0, 2.0),),
                     label=f"2c^2/sin^2, c={c:g}")


def inverse_square_potential(n: int = 1) -> Potential:
    """U = n(n+1)/x^2: rational degeneration."""
    return Potential("inverse_square", period=None, coeff=n * (n + 1),
                     real_poles=((0.0, n * (n + 1)),), label=f"{n*(n+1)}/x^2")


def callable_potential(func, period: float, real_poles=()) -> Potential:
    """Potential from an analytic callable U(x) (complex capable)."""
    return Potential("callable", period=period, func=func,
                     real_poles=tuple(real_poles), label="callable")


def lame_potential_from_branch_points(n: int, u0, u1, u2) -> Potential:
    """Lame-type potential whose spectral curve has the given branch points.

    Built on the lattice with roots sorted(s - u_i), s = (u0+u1+u2)/3, with
    constant offset s; for n = 1 the periodic/antiperiodic eigenvalues land
    exactly on u0, u1, u2.
    """
    from .elliptic import lattice_from_roots
    s = (u0 + u1 + u2) / 3.0
    roots = sorted([s - u0, s - u1, s - u2])
    lat = lattice_from_roots(roots, u_shift=s)
    return lame_potential(n, lat, offset=s)


# ---------------------------------------------------------------------------
# transfer matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransferMatrix:
    matrix: np.ndarray
    basepoint: complex
    endpoint: complex
    u: complex
    det_drift: float = 0.0

    @property
    def det_error(self) -> float:
        """Accumulated per-segment Wronskian drift (well conditioned even
        when the product matrix has large entries)."""
        return self.det_drift

    @property
    def half_trace(self) -> complex:
        return 0.5 * (self.matrix[0, 0] + self.matrix[1, 1])


def default_period_path(pot: Potential, eps: float = None, x0: float = 0.0):
    """Pole-avoiding path for one period starting at x0.

    Straight segment lifted to Im x = eps (default 1e-2 * period), with
    vertical drops at the endpoints when they are regular points.
    """
    T = pot.period
    if T is None:
        raise ValueError("aperiodic potential has no period path")
    eps = 1e-2 * T if eps is None else eps
    poles = pot.pole_positions(x0 - 1e-9, x0 + T + 1e-9)
    if not poles:
        return [x0 + 0j, x0 + T + 0j]
    endpoint_pole = any(abs(p - x0) < 1e-12 or abs(p - x0 - T) < 1e-12
                        for p in poles)
    if endpoint_pole:
        return [x0 + 1j * eps, x0 + T + 1j * eps]
    return [x0 + 0j, x0 + 1j * eps, x0 + T + 1j * eps, x0 + T + 0j]


def _check_clearance(pot: Potential, path, clearance):
    for za, zb in zip(path[:-1], path[1:]):
        lo = min(za.real, zb.real) - 1.0
        hi = max(za.real, zb.real) + 1.0
        poles = pot.pole_positions(lo, hi)
        if not poles:
            continue
        ts = np.linspace(0.0, 1.0, 64)
        seg = za + (zb - za) * ts
        for p in poles:
            d = np.min(np.abs(seg - p))
            if d < clearance:
                raise PathTooCloseToPole(
                    f"path within {d:.3g} of pole at {p:g}")


def _subdivide_at_poles(pot: Potential, path, width):
    """Insert waypoints around real-pole crossings of horizontal segments.

    Keeps the per-segment matrix elements moderate so the Wronskian of each
    piece is a well-conditioned check.
    """
    out = [path[0]]
    for za, zb in zip(path[:-1], path[1:]):
        if abs(zb.real - za.real) > 1e-14:
            lo, hi = sorted((za.real, zb.real))
            cuts = []
            for p in pot.pole_positions(lo - width, hi + width):
                for c in (p - width, p + width):
                    if lo + 1e-12 < c < hi - 1e-12:
                        cuts.append(c)
            t = np.sort([(c - za.real) / (zb.real - za.real)
                         for c in cuts])
            for ti in t:
                out.append(za + (zb - za) * ti)
        out.append(zb)
    return out


def integrate_transfer(pot: Potential, u, x_path=None, eps: float = None,
                       rtol: float = 1e-11, atol: float = 1e-13,
                       clearance: float = None) -> TransferMatrix:
    """Fundamental matrix in the (psi, psi') basis along the path.

    The default path covers one period starting at 0, lifted into the upper
    half-plane when real poles are present. The Wronskian (det = 1) is
    verified per subdivided segment and the accumulated drift is stored.
    """
    if x_path is None:
        x_path = default_period_path(pot, eps=eps)
    path = [complex(z) for z in x_path]
    scale = max(abs(path[-1] - path[0]), 1e-12)
    clearance = 1e-4 * scale if clearance is None else clearance
    _check_clearance(pot, path, clearance)
    if pot.period is not None:
        path = _subdivide_at_poles(pot, path, width=0.1 * pot.period)
    code, strength, offset, shift, cpar, params, func = pot._kernel_args()
    M = np.eye(2, dtype=complex)
    det_drift = 0.0
    for za, zb in zip(path[:-1], path[1:]):
        seg, status = kernels.propagate_transfer(
            u, za, zb, code, strength, offset, shift, cpar, params,
            func=func, rtol=rtol, atol=atol)
        if status != 0:
            raise StepSizeUnderflow(
                f"integrator stalled on segment {za} -> {zb} at u={u}")
        det_drift += abs(np.linalg.det(seg) - 1.0)
        M = seg @ M
    tm = TransferMatrix(M, path[0], path[-1], complex(u), det_drift)
    if det_drift > DET_TOL:
        raise StepSizeUnderflow(
            f"Wronskian drift {det_drift:.2e} exceeds {DET_TOL:g}")
    return tm


def monodromy_trace(pot: Potential, u, eps: float = None, method: str = "auto",
                    rtol: float = 1e-12, atol: float = 1e-14) -> complex:
    """Half-trace S(u) of the one-period transfer matrix.

    For lattice-based singular potentials the default route integrates the
    smooth midline representative (x shifted by i*omega), which is homotopic
    rel poles to the lifted path and has the same trace; ``method='lifted'``
    forces the epsilon-lifted path through the singular line.
    """
    if method == "auto" and pot.kind == "lame":
        smooth = replace(pot, kind="shifted_lame", real_poles=())
        T = pot.period
        tm = integrate_transfer(smooth, u, x_path=[0.0, T], rtol=rtol,
                                atol=atol)
        return tm.half_trace
    tm = integrate_transfer(pot, u, eps=eps, rtol=rtol, atol=atol)
    return tm.half_trace


def trace_derivative(pot: Potential, u, h: float = None, **kw) -> complex:
    """dS/du by Richardson-extrapolated central differences."""
    u = complex(u)
    h = 1e-4 * max(abs(u), 1.0) if h is None else h
    d1 = (monodromy_trace(pot, u + h, **kw)
          - monodromy_trace(pot, u - h, **kw)) / (2 * h)
    d2 = (monodromy_trace(pot, u + h / 2, **kw)
          - monodromy_trace(pot, u - h / 2, **kw)) / h
    return (4 * d2 - d1) / 3.0


# ---------------------------------------------------------------------------
# band edges and Hermite (singular Dirichlet) spectrum
# ---------------------------------------------------------------------------


@dataclass
class SpectrumReport:
    band_edges: list = field(default_factory=list)
    edge_parities: list = field(default_factory=list)  # S at the edge (+-1)
    hermit_points: list = field(default_factory=list)
    hermit_parities: list = field(default_factory=list)
    degenerate_free: bool = False
    samples: list = field(default_factory=list)  # (u, S(u)) pairs

    def to_json(self) -> str:
        return json.dumps({
            "band_edges": list(map(float, self.band_edges)),
            "edge_parities": list(map(int, self.edge_parities)),
            "hermit_points": list(map(float, self.hermit_points)),
            "hermit_parities": list(map(int, self.hermit_parities)),
            "degenerate_free": self.degenerate_free,
        }, indent=2)


def _scan(pot, lo, hi, ngrid, **kw):
    us = np.linspace(lo, hi, ngrid)
    Ss = np.array([monodromy_trace(pot, u, **kw).real for u in us])
    return us, Ss


def find_band_edges(pot: Potential, search_interval, ngrid: int = 240,
                    cluster_tol: float = 1e-9, **kw):
    """Simple roots of S^2 - 1 (band edges) in the interval."""
    lo, hi = search_interval
    us, Ss = _scan(pot, lo, hi, ngrid, **kw)
    D = Ss * Ss - 1.0
    edges = []
    parities = []
    for i in range(len(us) - 1):
        if D[i] == 0.0:
            continue
        if D[i] * D[i + 1] < 0:
            root = brentq(
                lambda u: monodromy_trace(pot, u, **kw).real ** 2 - 1.0,
                us[i], us[i + 1], xtol=1e-12, rtol=1e-14)
            edges.append(root)
            parities.append(int(np.sign(monodromy_trace(pot, root, **kw).real)))
    for a, b in zip(edges[:-1], edges[1:]):
        if abs(a - b) < cluster_tol * max(abs(a), abs(b), 1.0):
            raise RootClusterUnresolved(f"edges {a} and {b} unresolved")
    return edges, parities


def find_hermit_spectrum(pot: Potential, search_interval, ngrid: int = 240,
                         tol: float = 1e-7, **kw) -> SpectrumReport:
    """Double roots of S^2 = 1 (S = +-1 with S' = 0) in the interval.

    These are located as roots of S' confirmed by |S| = 1; for the free
    particle every root is double and the report is flagged degenerate
    instead of listing Hermite points.
    """
    lo, hi = search_interval
    report = SpectrumReport()
    us, Ss = _scan(pot, lo, hi, ngrid, **kw)
    report.samples = list(zip(us.tolist(), Ss.tolist()))
    dS = np.array([trace_derivative(pot, u, **kw).real for u in us])
    for i in range(len(us) - 1):
        if dS[i] == 0.0 or dS[i] * dS[i + 1] >= 0:
            continue
        root = brentq(lambda u: trace_derivative(pot, u, **kw).real,
                      us[i], us[i + 1], xtol=1e-11, rtol=1e-14)
        Sval = monodromy_trace(pot, root, **kw).real
        if abs(abs(Sval) - 1.0) < tol:
            if pot.kind == "free":
                report.degenerate_free = True
                continue
            report.hermit_points.append(root)
            report.hermit_parities.append(int(np.sign(Sval)))
    edges, parities = find_band_edges(pot, search_interval, ngrid, **kw)
    report.band_edges = edges
    report.edge_parities = parities
    return report


# ---------------------------------------------------------------------------
# singular Dirichlet problem by shooting (independent oracle)
# ---------------------------------------------------------------------------


def _wp_taylor_even(lat: Lattice, center, nterms: int):
    """Even Taylor coefficients of wp(center + t) about a half-period
    (wp' = 0 there), from the defining equation wp'' = 6 wp^2 - g2/2."""
    from .elliptic import wp_family
    a = [complex(wp_family(center, lat)[0])]
    g2 = complex(lat.g2)
    for k in range(nterms - 1):
        conv = sum(a[i] * a[k - i] for i in range(k + 1))
        val = 6.0 * conv - (0.5 * g2 if k == 0 else 0.0)
        a.append(val / ((2 * k + 2) * (2 * k + 1)))
    return np.array([v.real for v in a])


def _wp_laurent_tail(lat: Lattice, nterms: int):
    """Coefficients c_k of wp = 1/x^2 + sum_k c_k x^{2k} (k >= 1)."""
    g2, g3 = lat.g2.real, lat.g3.real
    c = [g2 / 20.0, g3 / 28.0]
    while len(c) < nterms:
        k = len(c) + 1
        acc = sum(c[m - 1] * c[k - 1 - m - 1] for m in range(1, k - 1))
        c.append(3.0 * acc / ((2 * k + 3) * (k - 2)))
    return np.array(c[:nterms])


# even Laurent tails of 1/sin^2 and 1/sinh^2 (1/y^2 + sum t_k y^{2k})
_SIN_TAIL = np.array([1 / 3, 1 / 15, 2 / 189, 1 / 675, 2 / 10395])


def local_even_expansion(pot: Potential, npole: int, nterms: int = 5,
                         delta: float = None):
    """Coefficients [C0, C2, C4, ...] of U(x) - n(n+1)/x^2 near x = 0.

    Exact (series/ODE-recursion) for the built-in analytic kinds; a small
    even-stencil fit for callables. The potential must be even about 0.
    """
    if pot.kind == "free":
        out = np.zeros(nterms)
        out[0] = pot.offset
        return out
    if pot.kind == "shifted_lame":
        shift = 1j * pot.lattice.imaginary_shift()
        a = _wp_taylor_even(pot.lattice, shift, nterms)
        s = pot.n * (pot.n + 1)
        out = s * a
        out[0] += pot.offset
        return out
    if pot.kind == "lame":
        c = _wp_laurent_tail(pot.lattice, nterms - 1)
        s = pot.n * (pot.n + 1)
        return np.concatenate([[pot.offset], s * c])
    if pot.kind in ("sin", "sinh"):
        sgn = 1.0 if pot.kind == "sin" else -1.0
        c = pot.c
        ks = np.arange(nterms)
        tail = np.concatenate([_SIN_TAIL, np.zeros(nterms)])[:nterms]
        out = 2.0 * c * c * (sgn ** (ks + 1)) * tail * c ** (2 * ks)
        out[0] += pot.offset
        return out
    if pot.kind == "inverse_square":
        out = np.zeros(nterms)
        out[0] = pot.offset
        return out
    T = pot.period if pot.period is not None else np.pi
    delta = 0.02 * T if delta is None else delta
    nfit = min(nterms, 4)
    xs = delta * np.linspace(1.0, 2.4, 2 * nfit + 5)
    cpole = npole * (npole + 1)
    vals = np.array([complex(pot.value(x)).real - cpole / x ** 2 for x in xs])
    A = np.vander(xs ** 2, nfit, increasing=True)
    coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
    return np.concatenate([coef, np.zeros(nterms - nfit)])


def _frobenius_seed(npole: int, C, lam: float, x: float, mmax: int = 8):
    """(psi, psi') of the recessive solution x^{n+1}(1 + sum b_{2m} x^{2m})."""
    n = npole
    b = [1.0]
    for m in range(1, mmax + 1):
        denom = (n + 1 + 2 * m) * (n + 2 * m) - n * (n + 1)
        rhs = (C[0] - lam) * b[m - 1]
        for k in range(1, len(C)):
            if m - 1 - k >= 0:
                rhs += C[k] * b[m - 1 - k]
        b.append(rhs / denom)
    if abs(b[-1] * x ** (2 * mmax)) > abs(b[0]) * 1e-4:
        raise FrobeniusSeriesDivergence(
            f"series not converged at x={x:g} (term {b[-1]:.2e})")
    psi = sum(bm * x ** (n + 1 + 2 * m) for m, bm in enumerate(b))
    dpsi = sum((n + 1 + 2 * m) * bm * x ** (n + 2 * m)
               for m, bm in enumerate(b))
    return psi, dpsi


def _shoot_half(pot: Potential, lam: float, x_from: float, x_to: float,
                y0, rtol=1e-11, atol=1e-13):
    def rhs(x, y):
        U = complex(pot.value(x)).real
        return [y[1], (U - lam) * y[0]]

    sol = solve_ivp(rhs, (x_from, x_to), y0, method="DOP853", rtol=rtol,
                    atol=atol, dense_output=False)
    if not sol.success:
        raise StepSizeUnderflow(sol.message)
    return sol.y[0, -1], sol.y[1, -1]


def dirichlet_miss(pot: Potential, lam: float, npole: int = None,
                   delta: float = None, coeffs=None):
    """Matching Wronskian at period/2 for the singular Dirichlet problem.

    Zero exactly at eigenvalues: the recessive solutions launched from both
    poles are proportional iff lam is an eigenvalue. Assumes U even about 0.
    """
    T = pot.period
    if T is None:
        raise ValueError("Dirichlet problem needs a periodic potential")
    if npole is None:
        npole = 0
        if pot.real_poles:
            c = pot.real_poles[0][1]
            npole = int(round((-1 + np.sqrt(1 + 4 * c)) / 2))
    if npole == 0:
        yL = _shoot_half(pot, lam, 0.0, T / 2, [0.0, 1.0])
        yR = _shoot_half(pot, lam, T, T / 2, [0.0, -1.0])
    else:
        delta = 0.02 * T if delta is None else delta
        C = coeffs if coeffs is not None else local_even_expansion(pot, npole)
        psi0, dpsi0 = _frobenius_seed(npole, C, lam, delta)
        yL = _shoot_half(pot, lam, delta, T / 2, [psi0, dpsi0])
        yR = _shoot_half(pot, lam, T - delta, T / 2, [psi0, -dpsi0])
    # Wronskian of left and right solutions at the midpoint
    return yL[0] * yR[1] - yL[1] * yR[0]


def dirichlet_shooting_oracle(pot: Potential, search_interval, npole=None,
                              ngrid: int = 120, delta: float = None):
    """Eigenvalues of the singular Dirichlet problem on one period.

    Entirely independent of the monodromy machinery (scipy DOP853 shooting
    with recessive Frobenius seeds at the poles).
    """
    lo, hi = search_interval
    if npole is None and pot.real_poles:
        c = pot.real_poles[0][1]
        npole = int(round((-1 + np.sqrt(1 + 4 * c)) / 2))
    npole = npole or 0
    coeffs = (local_even_expansion(pot, npole) if npole else None)
    lams = np.linspace(lo, hi, ngrid)
    vals = [dirichlet_miss(pot, lam, npole, delta, coeffs) for lam in lams]
    eigs = []
    for i in range(ngrid - 1):
        if vals[i] == 0.0:
            eigs.append(lams[i])
        elif vals[i] * vals[i + 1] < 0:
            eigs.append(brentq(
                lambda lam: dirichlet_miss(pot, lam, npole, delta, coeffs),
                lams[i], lams[i + 1], xtol=1e-11, rtol=1e-13))
    for a, b in zip(eigs[:-1], eigs[1:]):
        if b - a < 1e-9 * max(abs(a), abs(b), 1.0):
            raise RootClusterUnresolved(f"eigenvalues {a}, {b} unresolved")
    return eigs
