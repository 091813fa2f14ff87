"""Timing comparison of the two routing-kernel backends.

Run:  python3 benchmarks/bench_kernels.py

Both backends are imported directly (the SMARLAB_KERNELS switch only
affects which one the package exposes), timed on identical inputs, and
checked for agreement before any number is reported.
"""

import time

import numpy as np

from smarlab.kernels import _pyref

try:
    from smarlab.kernels import _routing
except ImportError:
    _routing = None


def time_call(fn, *args, repeats=5, min_seconds=0.2):
    """Best-of-repeats wall time; each repeat loops until min_seconds so
    tiny inputs are not lost in timer noise."""
    best = float("inf")
    for _ in range(repeats):
        loops = 0
        start = time.perf_counter()
        while True:
            fn(*args)
            loops += 1
            elapsed = time.perf_counter() - start
            if elapsed >= min_seconds:
                break
        best = min(best, elapsed / loops)
    return best


def bench_topk(rows, experts, k, rng):
    probs = rng.dirichlet(np.ones(experts), size=rows)
    sel_py, w_py = _pyref.topk_rows(probs, k)
    results = {"python": time_call(_pyref.topk_rows, probs, k)}
    if _routing is not None:
        sel_c, w_c = _routing.topk_rows(probs, k)
        assert np.array_equal(sel_py, sel_c) and np.array_equal(w_py, w_c)
        results["cython"] = time_call(_routing.topk_rows, probs, k)
    return results


def bench_counts(rows, experts, k, rng):
    probs = rng.dirichlet(np.ones(experts), size=rows)
    selected, _ = _pyref.topk_rows(probs, k)
    groups = rng.integers(0, 2, size=rows).astype(np.int64)
    c_py = _pyref.selection_counts(selected, groups, experts)
    results = {"python": time_call(_pyref.selection_counts, selected, groups, experts)}
    if _routing is not None:
        c_c = _routing.selection_counts(selected, groups, experts)
        assert np.array_equal(c_py, c_c)
        results["cython"] = time_call(_routing.selection_counts, selected, groups, experts)
    return results


def main():
    rng = np.random.default_rng(0)
    shapes = [(64, 8, 2), (256, 8, 2), (1024, 16, 4), (8192, 32, 4)]
    print(f"{'kernel':<18}{'rows':>6}{'E':>4}{'k':>3}"
          f"{'python':>12}{'cython':>12}{'speedup':>9}")
    for name, bench in (("topk_rows", bench_topk), ("selection_counts", bench_counts)):
        for rows, experts, k in shapes:
            r = bench(rows, experts, k, rng)
            py_us = r["python"] * 1e6
            if "cython" in r:
                c_us = r["cython"] * 1e6
                ratio = f"{r['python'] / r['cython']:.1f}x"
                print(f"{name:<18}{rows:>6}{experts:>4}{k:>3}"
                      f"{py_us:>10.1f}us{c_us:>10.1f}us{ratio:>9}")
            else:
                print(f"{name:<18}{rows:>6}{experts:>4}{k:>3}"
                      f"{py_us:>10.1f}us{'n/a':>12}{'':>9}")
    if _routing is None:
        print("\ncompiled backend not importable; only the numpy reference was timed")


if __name__ == "__main__":
    main()
