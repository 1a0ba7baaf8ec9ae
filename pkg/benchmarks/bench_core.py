"""Benchmark of the compiled kernels against the pure-Python fallback.

Times the two hot paths -- scalar Weierstrass family evaluation and the
one-period transfer-matrix propagation -- on both backends and prints a
table. Run as:

    python3 benchmarks/bench_core.py [--repeat N]
"""

import argparse
import time

import numpy as np

from fingap._core import reference
from fingap.elliptic import lattice_from_branch_points

try:
    from fingap._core import _fast
except ImportError:
    _fast = None


def time_it(fn, repeat):
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def bench_wp(backend, params, repeat):
    zs = [0.3 + 0.2j, 1.1 - 0.4j, 0.05 + 0.9j, 2.2 + 0.01j]

    def run():
        for z in zs:
            backend.wp_family(z, params)

    return time_it(run, repeat) / len(zs)


def bench_transfer(backend, params, T, repeat):
    shift = 1j * abs(complex(params[1]).imag)

    def run():
        backend.propagate_transfer(3.0 + 0j, 0j, T + 0j, 1, 2.0 + 0j, 0j,
                                   shift, 0j, params, rtol=1e-12, atol=1e-13)

    return time_it(run, repeat)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    lat = lattice_from_branch_points(-1.0, 0.0, 1.0)
    T = lat.real_period()
    rows = []
    backends = [("python", reference)]
    if _fast is not None:
        backends.append(("cython", _fast))
    for name, mod in backends:
        wp_t = bench_wp(mod, lat.params, max(args.repeat * 25, 100))
        tr_t = bench_transfer(mod, lat.params, T,
                              args.repeat if name == "python" else
                              args.repeat * 10)
        rows.append((name, wp_t, tr_t))

    print(f"{'backend':<10}{'wp_family [us]':>16}{'monodromy [ms]':>17}")
    for name, wp_t, tr_t in rows:
        print(f"{name:<10}{wp_t * 1e6:>16.2f}{tr_t * 1e3:>17.2f}")
    if len(rows) == 2:
        print(f"{'speedup':<10}{rows[0][1] / rows[1][1]:>15.1f}x"
              f"{rows[0][2] / rows[1][2]:>16.1f}x")
        # agreement of the two backends on the same monodromy matrix
        shift = 1j * abs(complex(lat.params[1]).imag)
        a, _ = reference.propagate_transfer(3.0 + 0j, 0j, T + 0j, 1, 2.0 + 0j,
                                            0j, shift, 0j, lat.params,
                                            rtol=1e-12, atol=1e-13)
        b, _ = _fast.propagate_transfer(3.0 + 0j, 0j, T + 0j, 1, 2.0 + 0j,
                                        0j, shift, 0j, lat.params,
                                        rtol=1e-12, atol=1e-13)
        print(f"backend agreement: {np.max(np.abs(a - b)):.2e}")


if __name__ == "__main__":
    main()
