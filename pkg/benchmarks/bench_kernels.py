"""Time the overlap kernel on both backends and check they agree.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--l-max L] [--p-max P]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from oamspdc.kernels import available_backends
from oamspdc.spectrum import (
    ModeWindow,
    QuadratureSettings,
    _laguerre_rule,
    _legendre_rule,
    _window_pairs,
    _z_tables,
    default_crystal,
)


def workload(window: ModeWindow, quad: QuadratureSettings):
    crystal = default_crystal()
    rows = [(L, 0) + key for L in (-2, 0, 2) for key in _window_pairs(L, window)]
    z, zw, w, kappa, gouy = _z_tables(crystal, quad.n_z)
    x, xw = _laguerre_rule(quad.n_r)
    return np.array(rows, dtype=np.int64), (w, kappa, gouy, zw, x, xw)


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--l-max", type=int, default=5)
    ap.add_argument("--p-max", type=int, default=3)
    ap.add_argument("--n-r", type=int, default=64)
    ap.add_argument("--n-z", type=int, default=32)
    args = ap.parse_args()

    triples, tables = workload(ModeWindow(args.l_max, args.p_max), QuadratureSettings(args.n_r, args.n_z))
    backends = available_backends()
    print(f"{len(triples)} triples, {args.n_r} radial x {args.n_z} longitudinal nodes, best of {args.repeat}")
    results, timings = {}, {}
    for name, mod in backends.items():
        results[name] = mod.overlap_batch(triples, *tables)
        timings[name] = best_of(lambda: mod.overlap_batch(triples, *tables), args.repeat)
        print(f"  {name:7s} {timings[name] * 1e3:9.2f} ms")
    if "cython" in results:
        ref = results["python"]
        dev = np.max(np.abs(results["cython"] - ref)) / np.max(np.abs(ref))
        print(f"  speedup {timings['python'] / timings['cython']:.2f}x, max relative deviation {dev:.2e}")
    else:
        print("  compiled backend not built; only the NumPy path was timed")


if __name__ == "__main__":
    main()
