"""Benchmark the compiled kernels against the numpy fallback.

Usage: python bench/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from lenspipe import _kernels_py

try:
    from lenspipe import _native
except ImportError:
    _native = None


def timeit(fn, *args, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def planted(rng, n: int, dups: int, dim: int) -> np.ndarray:
    base = rng.standard_normal((n - dups, dim))
    extra = base[rng.integers(0, n - dups, size=dups)] + 1e-6 * rng.standard_normal((dups, dim))
    x = np.concatenate([base, extra])
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    grid = rng.integers(0, 256, size=(512, 512)).astype(np.float64)
    u8 = rng.integers(0, 256, size=(1024, 1024)).astype(np.uint8)
    unit = planted(rng, n=4000, dups=200, dim=64)

    cases = [
        ("laplacian_variance 512x512", "laplacian_variance", (grid,)),
        ("shannon_entropy 1024x1024", "shannon_entropy", (u8,)),
        ("dedup_scan 4000x64", "dedup_scan", (unit, 0.985)),
    ]

    print(f"{'kernel':<28} {'python':>10} {'native':>10} {'speedup':>8}")
    for label, name, call_args in cases:
        py = timeit(getattr(_kernels_py, name), *call_args, repeats=args.repeats)
        if _native is None:
            print(f"{label:<28} {py * 1e3:>8.2f}ms {'n/a':>10} {'n/a':>8}")
            continue
        nat = timeit(getattr(_native, name), *call_args, repeats=args.repeats)
        print(f"{label:<28} {py * 1e3:>8.2f}ms {nat * 1e3:>8.2f}ms {py / nat:>7.1f}x")

    if _native is None:
        print("\nnative extension not built; only the fallback was timed")


if __name__ == "__main__":
    main()
