#!/usr/bin/env python3
"""Head-to-head timing of the compiled attack kernels vs the numpy fallback.

Run after installing the package:

    python benchmarks/bench_kernels.py [--sizes small|paper]

The workloads mirror the audit hot paths: nearest-neighbor linkage over a
release, and box membership for the same-row net variant.
"""

import argparse
import importlib
import time

import numpy as np

from tdp.kernels import _fallback

try:
    _core = importlib.import_module("tdp.kernels._core")
except ImportError:
    _core = None

SIZES = {
    "small": dict(n_ref=2_000, n_query=1_000, cols=8),
    "paper": dict(n_ref=20_000, n_query=5_000, cols=15),
}


def _time(fn, *args, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, result


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", choices=sorted(SIZES), default="small")
    args = parser.parse_args()
    cfg = SIZES[args.sizes]

    gen = np.random.default_rng(0)
    ref = gen.normal(size=(cfg["n_ref"], cfg["cols"]))
    qry = gen.normal(size=(cfg["n_query"], cfg["cols"]))
    radii = np.full(cfg["cols"], 0.05)

    backends = [("numpy-fallback", _fallback)]
    if _core is not None:
        backends.append(("cython", _core))
    else:
        print("compiled kernel not available; timing fallback only")

    kernels = ("nearest_row_index", "rows_within_box", "box_lone_occupant_hits")
    print(f"workload: {cfg['n_query']} queries x {cfg['n_ref']} refs x {cfg['cols']} cols")
    print(f"{'kernel':<24}{'backend':<18}{'best (s)':>10}")
    results = {}
    for kernel in kernels:
        for name, mod in backends:
            fn = getattr(mod, kernel)
            if kernel == "nearest_row_index":
                elapsed, out = _time(fn, ref, qry)
            else:
                elapsed, out = _time(fn, ref, qry, radii)
            results[(kernel, name)] = (elapsed, out)
            print(f"{kernel:<24}{name:<18}{elapsed:>10.4f}")

    if _core is not None:
        for kernel in kernels:
            a = results[(kernel, "numpy-fallback")][1]
            b = results[(kernel, "cython")][1]
            assert np.array_equal(np.asarray(a), np.asarray(b)), f"{kernel} mismatch"
            speedup = results[(kernel, "numpy-fallback")][0] / results[(kernel, "cython")][0]
            print(f"{kernel}: backends agree, cython speedup {speedup:.1f}x")


if __name__ == "__main__":
    main()
