"""Compiled vs pure-Python walk kernel: throughput and bitwise agreement.

Run ``python3 benchmarks/bench_walk.py [--samples N] [--steps L]``.
"""

import argparse
import time

import numpy as np

from isomwalk import kernels
from isomwalk.catalog import rotation_rich, skew_turn


def time_backend(backend, mu, steps, samples, repeats):
    mod = kernels.get_backend(backend)
    args = (np.ascontiguousarray(mu.rotations), np.ascontiguousarray(mu.translations),
            np.ascontiguousarray(mu.cumulative), 2024, 0, samples, np.zeros(mu.dim),
            np.array([steps], dtype=np.int64))
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = mod.walk_chunk(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--samples", type=int, default=20000)
    p.add_argument("--steps", type=int, default=256)
    p.add_argument("--repeats", type=int, default=3)
    args = p.parse_args(argv)
    print(f"default backend: {kernels.BACKEND}")
    print(f"{'measure':>14} {'backend':>9} {'seconds':>9} {'steps/s':>12}")
    for name, mu in (("rotation_rich", rotation_rich()), ("skew_turn", skew_turn())):
        results = {}
        for backend in ("compiled", "python"):
            try:
                secs, out = time_backend(backend, mu, args.steps, args.samples, args.repeats)
            except ImportError:
                print(f"{name:>14} {backend:>9} {'n/a':>9}")
                continue
            results[backend] = (secs, out)
            rate = args.steps * args.samples / secs
            print(f"{name:>14} {backend:>9} {secs:9.4f} {rate:12.3e}")
        if len(results) == 2:
            same = np.array_equal(results["compiled"][1], results["python"][1])
            speedup = results["python"][0] / results["compiled"][0]
            print(f"{name:>14} speedup {speedup:.1f}x, bitwise equal: {same}")


if __name__ == "__main__":
    main()
