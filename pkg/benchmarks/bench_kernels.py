#!/usr/bin/env python3
"""Compare the compiled and numpy covariant-sampling backends.

Usage: python benchmarks/bench_kernels.py [--shots N] [--repeats R]
"""

import argparse
import time

import numpy as np

from tomobench import kernels
from tomobench.qstate import equal_eigenvalue_spectrum


def time_backend(backend: str, d: int, r: int, shots: int, repeats: int) -> float:
    lam = equal_eigenvalue_spectrum(d, r)
    best = float("inf")
    for rep in range(repeats):
        rng = np.random.default_rng(rep)
        t0 = time.perf_counter()
        kernels.covariant_outcome_sum(lam, shots, rng, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--shots", type=int, default=500_000)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    backends = kernels.available_backends()
    print(f"available backends: {backends} (default: {kernels.BACKEND})")
    print(f"{'d':>4} {'r':>3} " + " ".join(f"{b:>12}" for b in backends) + "  speedup")
    for d, r in [(8, 1), (16, 4), (32, 1), (32, 32), (64, 1)]:
        times = [time_backend(b, d, r, args.shots, args.repeats) for b in backends]
        cells = " ".join(f"{t * 1e3:9.1f} ms" for t in times)
        speedup = times[0] / times[-1] if len(times) > 1 else 1.0
        print(f"{d:>4} {r:>3} {cells}  {speedup:6.2f}x")

    if len(backends) > 1:
        lam = equal_eigenvalue_spectrum(16, 4)
        a = kernels.covariant_outcome_sum(lam, 50_000, np.random.default_rng(1), backend=backends[0])
        b = kernels.covariant_outcome_sum(lam, 50_000, np.random.default_rng(1), backend=backends[1])
        print(f"max backend deviation on a shared stream: {np.max(np.abs(a - b)):.3e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
