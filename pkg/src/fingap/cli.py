"""Command-line front end: batch spectral computations with JSON/CSV
artifacts and a reproducible run manifest.

Subcommands: spectrum, hermit, inner-product, kernel-check, crum,
kdv-poles, fourier. Every run writes ``manifest.json`` (config echo,
library version, wall time, per-check pass/fail) into the output
directory; the exit status is 0 iff all enabled checks passed, 1 when a
numerical check failed, 2 for invalid configuration.

A config file may supply defaults as ``key = value`` lines (values parsed
as JSON; ``#`` comments allowed); command-line flags win. The default
output directory comes from the FINGAP_OUTDIR environment variable.
"""

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .errors import CheckFailed, ConfigInvalid, FingapError

DEFAULT_BRANCH_POINTS = (-1.0, 0.0, 1.0)


def _parse_config_file(path):
    out = {}
    try:
        with open(path) as fh:
            for line_no, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigInvalid(
                        f"{path}:{line_no}: expected 'key = value'")
                key, val = line.split("=", 1)
                try:
                    out[key.strip().replace("-", "_")] = json.loads(val.strip())
                except json.JSONDecodeError as exc:
                    raise ConfigInvalid(
                        f"{path}:{line_no}: bad value {val.strip()!r}") from exc
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
    return out


def _branch_points(args):
    pts = args.branch_points
    if isinstance(pts, str):
        try:
            pts = [float(v) for v in pts.split(",")]
        except ValueError as exc:
            raise ConfigInvalid(f"bad --branch-points {pts!r}") from exc
    if len(pts) != 3 or not pts[0] < pts[1] < pts[2]:
        raise ConfigInvalid("need three increasing branch points")
    return tuple(pts)


def _one_gap_family(args):
    from .bloch import Lame1Family
    from .elliptic import lattice_from_roots
    u0, u1, u2 = _branch_points(args)
    s = (u0 + u1 + u2) / 3.0
    lat = lattice_from_roots(sorted([s - u0, s - u1, s - u2]), u_shift=s)
    return Lame1Family(lat, offset=s)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


class Runner:
    """Collects per-check pass/fail results and writes the manifest."""

    def __init__(self, args):
        self.args = args
        self.checks = {}
        self.outputs = {}
        outdir = args.output_dir or os.environ.get("FINGAP_OUTDIR", ".")
        os.makedirs(outdir, exist_ok=True)
        self.outdir = outdir
        self.t0 = time.time()

    def path(self, name):
        return os.path.join(self.outdir, name)

    def check(self, name, value, tol, kind="abs"):
        ok = bool(value < tol)
        self.checks[name] = {"value": float(value), "tolerance": float(tol),
                             "kind": kind, "pass": ok}
        return ok

    def check_equal(self, name, flag):
        self.checks[name] = {"pass": bool(flag)}
        return bool(flag)

    def finish(self, extra=None):
        cfg = {k: v for k, v in sorted(vars(self.args).items())
               if k not in ("func",) and v is not None}
        manifest = {
            "config": cfg,
            "version": __version__,
            "wall_time_s": round(time.time() - self.t0, 3),
            "checks": self.checks,
        }
        if extra:
            manifest.update(extra)
        with open(self.path("manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
        failed = [k for k, v in self.checks.items() if not v["pass"]]
        if failed:
            raise CheckFailed(", ".join(failed))


def cmd_spectrum(args):
    from .spectral import find_hermit_spectrum, lame_potential_from_branch_points

    runner = Runner(args)
    u0, u1, u2 = _branch_points(args)
    pot = lame_potential_from_branch_points(args.lame_n, u0, u1, u2)
    span = u2 - u0
    lo, hi = u0 - 0.25 * span, u2 + args.window * span
    report = find_hermit_spectrum(pot, (lo, hi), ngrid=args.ngrid)
    with open(runner.path("spectrum.json"), "w") as fh:
        fh.write(report.to_json())
    _write_csv(runner.path("trace_samples.csv"), ["u", "S"],
               [(u, S) for u, S in report.samples])
    if args.lame_n == 1:
        edges = np.array(report.band_edges[:3])
        target = np.array([u0, u1, u2])
        err = float(np.max(np.abs(edges - target) / np.maximum(np.abs(target), 1.0)))
        runner.check("band_edges_match_branch_points", err, args.tol_edges,
                     "rel")
    runner.check_equal("hermit_points_above_u2",
                       all(l > u2 for l in report.hermit_points))
    runner.finish({"band_edges": report.band_edges,
                   "hermit_points": report.hermit_points})


def cmd_hermit(args):
    from .spectral import (dirichlet_shooting_oracle, find_hermit_spectrum,
                           lame_potential_from_branch_points)

    runner = Runner(args)
    u0, u1, u2 = _branch_points(args)
    pot = lame_potential_from_branch_points(args.lame_n, u0, u1, u2)
    span = u2 - u0
    lo, hi = u2 + 1e-3 * span, u2 + args.window * span
    report = find_hermit_spectrum(pot, (lo, hi), ngrid=args.ngrid)
    oracle = dirichlet_shooting_oracle(pot, (lo, hi), ngrid=args.ngrid // 2)
    k = min(len(report.hermit_points), len(oracle), args.count)
    rows = []
    worst = 0.0
    for i in range(k):
        a, b = report.hermit_points[i], oracle[i]
        rel = abs(a - b) / abs(b)
        worst = max(worst, rel)
        rows.append((i + 1, a, b, rel))
    _write_csv(runner.path("hermit_levels.csv"),
               ["index", "monodromy", "shooting", "rel_diff"], rows)
    runner.check_equal("enough_levels", k >= args.count)
    runner.check("monodromy_vs_shooting", worst, args.tol, "rel")
    runner.finish({"hermit_points": report.hermit_points[:k],
                   "oracle": oracle[:k]})


def cmd_inner_product(args):
    from .products import bloch_points, gram_matrix, negative_square_count

    runner = Runner(args)
    family = _one_gap_family(args)
    if args.n != 1:
        raise ConfigInvalid("closed-form inner products require --n 1")
    kappa = np.exp(1j * args.kappa)
    u2 = family.branch_points[-1]
    span = u2 - family.branch_points[0]
    umax = args.umax if args.umax else u2 + 50 * span
    pts = bloch_points(family, kappa, umax)
    report = negative_square_count(pts)
    first = [family.point(p.u, p.sheet) for p in pts.points[:args.count]]
    T = family.period
    G = gram_matrix(family, first, delta=args.eps * T)
    G2 = gram_matrix(family, first, delta=0.5 * args.eps * T)
    diag = np.diag(G)
    target = np.array([T * family.dp_over_dmu(z) for z in first])
    offdiag = float(np.max(np.abs(G - np.diag(diag))))
    maxdiag = float(np.max(np.abs(diag)))
    runner.check("gram_offdiagonal", offdiag / maxdiag, 1e-5, "rel")
    runner.check("gram_diagonal_vs_dp_dmu",
                 float(np.max(np.abs(diag - target) / np.abs(target))),
                 1e-6, "rel")
    runner.check("gram_eps_halving",
                 float(np.max(np.abs(G - G2))) / maxdiag, 1e-7, "rel")
    _write_csv(runner.path("gram.csv"),
               [""] + [f"z{i}" for i in range(len(first))],
               [[f"z{i}"] + [f"{v.real:+.12e}{v.imag:+.12e}j" for v in row]
                for i, row in enumerate(G)])
    with open(runner.path("signature.json"), "w") as fh:
        json.dump(report.to_json_dict(), fh, indent=2)
    runner.finish({"q_negative": report.q_negative,
                   "n_bloch_points": len(pts.points)})


def cmd_kernel_check(args):
    from .bloch import CauchyKernel

    runner = Runner(args)
    if args.lame_n != 1:
        raise ConfigInvalid("kernel-check requires --lame-n 1")
    family = _one_gap_family(args)
    K = CauchyKernel(family)
    rng = np.random.default_rng(args.seed)
    T = family.period
    u0, u1, u2 = family.branch_points
    worst_fl = 0.0
    worst_per = 0.0
    for _ in range(args.samples):
        x = rng.uniform(0.15, 0.85) * T
        uz = rng.uniform(u2 + 0.1, u2 + 6.0)
        uw = rng.uniform(u0 + 0.05 * (u1 - u0), u1 - 0.05 * (u1 - u0))
        if rng.random() < 0.5:
            uz, uw = uw, uz
        z = family.point(uz, 1 if rng.random() < 0.5 else -1)
        w = family.point(uw, 1 if rng.random() < 0.5 else -1)
        fd = K.x_derivative_fd(x, z, w)
        ex = K.x_derivative_exact(x, z, w)
        worst_fl = max(worst_fl, abs(fd - ex) / max(abs(ex), 1.0))
        ratio = K.value(x + T, z, w) / K.value(x, z, w)
        pred = np.exp(1j * (family.quasimomentum(z)
                            - family.quasimomentum(w)) * T)
        worst_per = max(worst_per, abs(ratio - pred))
    diag = K.diagonal_limit(0.37 * T, family.point(u2 + 1.7, +1))
    runner.check("fundamental_lemma_max_residual", worst_fl, 1e-6)
    runner.check("periodicity_max_residual", worst_per, 1e-6)
    runner.check("diagonal_limit_error", abs(diag - 1.0), 1e-6)
    runner.finish()


def cmd_crum(args):
    from .darboux import crum_chain
    from .elliptic import lattice_from_branch_points
    from .spectral import (dirichlet_shooting_oracle, free_potential,
                           monodromy_trace, shifted_lame_potential)

    runner = Runner(args)
    if args.seed_potential == "lame-shifted":
        lat = lattice_from_branch_points(*DEFAULT_BRANCH_POINTS)
        seed = shifted_lame_potential(1, lat)
        search = (-0.9, 40.0)
    elif args.seed_potential == "zero":
        seed = free_potential(period=np.pi)
        search = (0.2, 40.0)
    else:
        raise ConfigInvalid(f"unknown seed {args.seed_potential!r}")
    res = crum_chain(seed, args.steps, search=search)
    r = args.steps
    runner.check("pole_coefficient",
                 abs(res.pole_coefficient - r * (r + 1)), 1e-6)
    T = seed.period
    xs = np.linspace(0.05 * T, 0.95 * T, 120)
    _write_csv(runner.path("potential.csv"), ["x", "U_seed", "U_chain"],
               [(x, float(np.real(seed.value(x))),
                 float(np.real(np.asarray(res.potential.value(x)))))
                for x in xs])
    removed = res.removed_levels
    lo = removed[-1] + 0.2
    chain_levels = dirichlet_shooting_oracle(
        res.potential, (lo, lo + 25.0), npole=r, ngrid=50)
    seed_levels = dirichlet_shooting_oracle(seed, (search[0], lo + 25.0),
                                            ngrid=80)
    expect = [v for v in seed_levels if v > removed[-1] + 1e-6][:len(chain_levels)]
    worst = max((abs(a - b) / max(abs(b), 1.0)
                 for a, b in zip(chain_levels, expect)), default=np.inf)
    runner.check("spectrum_shift_by_removal", worst, 1e-6, "rel")
    us = [seed_levels[0] - 0.7, removed[-1] + 1.3]
    worst_tr = 0.0
    for u in us:
        s0 = monodromy_trace(seed, u).real
        s1 = monodromy_trace(res.potential, u, method="lifted",
                             rtol=1e-10, atol=1e-12).real
        worst_tr = max(worst_tr, abs(s0 - s1))
    runner.check("monodromy_trace_preserved", worst_tr, 1e-6)
    with open(runner.path("chain.json"), "w") as fh:
        json.dump({"removed_levels": removed,
                   "pole_coefficient": res.pole_coefficient,
                   "chain_levels": chain_levels,
                   "seed_levels": seed_levels}, fh, indent=2)
    runner.finish()


def cmd_kdv_poles(args):
    from .kdv import (classify_orbits, ode_similarity_crosscheck,
                      solve_similarity_system)

    runner = Runner(args)
    n = args.n
    N = n * (n + 1) // 2
    coeffs = solve_similarity_system(N, starts=args.starts, seed=args.seed)
    report = classify_orbits(coeffs)
    runner.check("set_invariance", coeffs.invariance_defect, 1e-8)
    runner.check("pole_locus_constraint", coeffs.constraint_defect, 1e-6)
    runner.check_equal("real_orbit_count_conjecture",
                       report.real_orbit_count == (n + 1) // 2)
    payload = report.to_json_dict()
    payload["a_values"] = [[v.real, v.imag] for v in coeffs.values]
    if n == 3:
        cubes = sorted(report.orbit_cubes, key=abs)
        w = cubes[0] / cubes[1]
        w_exact = 0.5 * (-7.0 + np.sqrt(45.0))
        payload["w"] = [w.real, w.imag]
        runner.check("w_ratio", abs(w - w_exact) / abs(w_exact), 1e-8, "rel")
    with open(runner.path("kdv_poles.json"), "w") as fh:
        json.dump(payload, fh, indent=2)
    if not args.skip_crosscheck and N <= 10:
        dev = ode_similarity_crosscheck(n, coeffs=coeffs)
        runner.check("self_similar_deviation", dev, 1e-6)
        ts = np.geomspace(1e-4, 1e-3, 9)
        rows = []
        for t in ts:
            xs = coeffs.values * t ** (1.0 / 3.0)
            rows.append([t] + [f"{v.real:+.9e}{v.imag:+.9e}j" for v in xs])
        _write_csv(runner.path("trajectories.csv"),
                   ["t"] + [f"x{j}" for j in range(N)], rows)
    runner.finish({"real_orbit_count": report.real_orbit_count})


def cmd_fourier(args):
    from .bloch import Genus0Family
    from .products import ContourGrid, ba_fourier_forward, ba_fourier_inverse

    runner = Runner(args)
    fam = Genus0Family(u0=0.0)
    kmax = args.kmax
    grid = ContourGrid.on_infinite_zone(fam, 0.0, kmax ** 2, n=args.ngrid)
    kvals = np.array([pt.sheet * np.sqrt(abs(pt.u)) for pt in grid.points])
    phi = np.exp(-kvals ** 2 / 2.0)
    x_grid = np.linspace(-args.xmax, args.xmax, args.nx)
    f = ba_fourier_forward(fam, phi, grid, x_grid)
    target = np.exp(-x_grid ** 2 / 2.0)
    l2 = float(np.sqrt(np.trapezoid(np.abs(f - target) ** 2, x_grid)))
    phi_back = ba_fourier_inverse(fam, f, x_grid, grid)
    rt = float(np.max(np.abs(phi_back - phi)))
    _write_csv(runner.path("transform.csv"), ["x", "re_f", "im_f"],
               [(x, v.real, v.imag) for x, v in zip(x_grid, f)])
    runner.check("gaussian_forward_l2", l2, args.tol)
    runner.check("round_trip_max", rt, args.tol)
    runner.finish()


def build_parser():
    p = argparse.ArgumentParser(
        prog="fingap",
        description="spectral numerics for singular one-dimensional "
                    "finite-gap operators")
    p.add_argument("--config", help="key = value defaults file")
    p.add_argument("--output-dir", help="artifact directory "
                                        "(default $FINGAP_OUTDIR or .)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spectrum", help="band edges and trace samples")
    sp.add_argument("--lame-n", type=int, default=1)
    sp.add_argument("--branch-points", default="-1,0,1")
    sp.add_argument("--window", type=float, default=20.0,
                    help="search window above u2 in units of u2-u0")
    sp.add_argument("--ngrid", type=int, default=240)
    sp.add_argument("--tol-edges", type=float, default=1e-6)
    sp.set_defaults(func=cmd_spectrum)

    hp = sub.add_parser("hermit", help="double periodic/antiperiodic levels "
                                       "vs the shooting oracle")
    hp.add_argument("--lame-n", type=int, default=1)
    hp.add_argument("--branch-points", default="-1,0,1")
    hp.add_argument("--window", type=float, default=20.0)
    hp.add_argument("--count", type=int, default=3)
    hp.add_argument("--ngrid", type=int, default=160)
    hp.add_argument("--tol", type=float, default=1e-6)
    hp.set_defaults(func=cmd_hermit)

    ip = sub.add_parser("inner-product", help="Bloch points, Gram matrix "
                                              "and signature")
    ip.add_argument("--kappa", type=float, default=0.0,
                    help="multiplier angle in radians")
    ip.add_argument("--n", type=int, default=1, help="Lame index")
    ip.add_argument("--umax", type=float, default=None)
    ip.add_argument("--count", type=int, default=4)
    ip.add_argument("--eps", type=float, default=0.01,
                    help="contour lift in units of the period")
    ip.add_argument("--branch-points", default="-1,0,1")
    ip.set_defaults(func=cmd_inner_product)

    kc = sub.add_parser("kernel-check", help="two-point kernel identities")
    kc.add_argument("--lame-n", type=int, default=1)
    kc.add_argument("--branch-points", default="-1,0,1")
    kc.add_argument("--samples", type=int, default=10)
    kc.set_defaults(func=cmd_kernel_check)

    cr = sub.add_parser("crum", help="ground-state chain from a smooth seed")
    cr.add_argument("--seed-potential", dest="seed_potential",
                    choices=("lame-shifted", "zero"), default="lame-shifted")
    cr.add_argument("--steps", type=int, default=1)
    cr.set_defaults(func=cmd_crum)

    kp = sub.add_parser("kdv-poles", help="self-similar pole coefficients")
    kp.add_argument("--n", type=int, default=3)
    kp.add_argument("--starts", type=int, default=200)
    kp.add_argument("--skip-crosscheck", action="store_true")
    kp.set_defaults(func=cmd_kdv_poles)

    fr = sub.add_parser("fourier", help="free transform pair round trip")
    fr.add_argument("--kmax", type=float, default=8.0)
    fr.add_argument("--xmax", type=float, default=8.0)
    fr.add_argument("--ngrid", type=int, default=320)
    fr.add_argument("--nx", type=int, default=801)
    fr.add_argument("--tol", type=float, default=1e-6)
    fr.set_defaults(func=cmd_fourier)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        defaults = _parse_config_file(args.config)
        for key, val in defaults.items():
            if getattr(args, key, None) in (None,) and hasattr(args, key):
                setattr(args, key, val)
    try:
        args.func(args)
    except ConfigInvalid as exc:
        print(f"fingap: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except CheckFailed as exc:
        print(f"fingap: check failed: {exc}", file=sys.stderr)
        return 1
    except FingapError as exc:
        print(f"fingap: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
