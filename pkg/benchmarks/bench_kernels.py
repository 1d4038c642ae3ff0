#!/usr/bin/env python3
"""Numba vs numpy timing for the two placement kernels.

Both paths must agree on every input; the script checks that before timing.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import time

import numpy as np

from pqsched import _kernels as K


def instance(rng, n, p, d=3, s=1):
    W = rng.uniform(0.0, 100.0, (n, d))
    V = rng.uniform(0.0, 0.2, (n, s))
    T = 0.5 * W.max(axis=1) + 0.5 * W.sum(axis=1)
    order = np.argsort(-T, kind="stable")
    return order, T, W, V, p


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if K.pipe_place_numba is None:
        raise SystemExit("numba is not installed; nothing to compare")

    rng = np.random.default_rng(0)
    # compile outside the timed region
    o, T, W, V, p = instance(rng, 8, 2)
    K.pipe_place(o, W, V, p, use_numba=True)
    K.lpt_shelves(o, T, W, V, p, use_numba=True)

    print(f"{'kernel':<12} {'n':>6} {'P':>4} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for n, p in [(100, 10), (1000, 40), (10000, 60)]:
        o, T, W, V, _ = instance(rng, n, p)
        V = np.minimum(V * (p / max(1.0, V.sum())), 0.2)  # keep it placeable
        cases = {
            "pipe_place": lambda u: K.pipe_place(o, W, V, p, use_numba=u),
            "lpt_shelves": lambda u: K.lpt_shelves(o, T, W, V, p, use_numba=u),
        }
        for name, run in cases.items():
            a, b = run(False), run(True)
            for x, y in zip(a, b):
                assert np.array_equal(x, y), f"{name}: paths disagree at n={n}"
            t_np = best_of(lambda: run(False), args.repeat) * 1e3
            t_nb = best_of(lambda: run(True), args.repeat) * 1e3
            print(f"{name:<12} {n:>6} {p:>4} {t_np:>10.3f} {t_nb:>10.3f} {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
