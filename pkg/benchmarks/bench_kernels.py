"""Compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import time

import numpy as np

from floodtrend import _kernels_py

try:
    from floodtrend import _kernels
except ImportError:
    _kernels = None


def _cases(rng):
    n_years, n_events, reps = 147, 1500, 1000
    yr = rng.integers(0, n_years, size=(reps, n_events))
    w = rng.lognormal(0, 2, n_events)
    Y = rng.poisson(np.exp(1.0 + 0.01 * np.arange(n_years)), size=(reps, n_years)).astype(float)
    x = np.arange(n_years, dtype=float)
    u, v = rng.random(2000), rng.random(2000)
    s = rng.gamma(2.0, 1.0, 200_000)
    idx = np.flatnonzero(s > np.quantile(s, 0.99))
    return {
        "scatter_annual 1000x1500": lambda k: k.scatter_annual(yr, w, n_years),
        "poisson_fit_batch 1000x147": lambda k: k.poisson_fit_batch(Y, x),
        "empirical_copula n=2000": lambda k: k.empirical_copula(u, v),
        "decluster_peaks 2000 idx": lambda k: k.decluster_peaks(idx, s[idx], 3),
    }


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    cases = _cases(np.random.default_rng(0))
    print(f"{'kernel':30s} {'python [ms]':>12s} {'compiled [ms]':>14s} {'speedup':>8s}")
    for name, fn in cases.items():
        tp = _time(lambda: fn(_kernels_py), args.repeat)
        if _kernels is None:
            print(f"{name:30s} {1e3 * tp:12.2f} {'n/a':>14s}")
            continue
        tc = _time(lambda: fn(_kernels), args.repeat)
        print(f"{name:30s} {1e3 * tp:12.2f} {1e3 * tc:14.2f} {tp / tc:8.1f}x")


if __name__ == "__main__":
    main()
