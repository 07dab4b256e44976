"""Benchmark the numba path-accrual kernel against the pure-numpy fallback.

Run from the repository root:

    python benchmarks/bench_kernels.py [--paths N] [--steps N] [--workers N]

The numba backend must be enabled (do not set HIERCON_DISABLE_NUMBA).
"""

import argparse
import time

import numpy as np

import hiercon._kernels as kernels


def bench(fn, dw, sigma, weights, repeats):
    fn(dw, sigma, weights)  # warm-up (JIT compile / cache load)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(dw, sigma, weights)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=4096)
    ap.add_argument("--steps", type=int, default=2048)
    ap.add_argument("--workers", type=int, default=2)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    dw = rng.standard_normal((args.workers, args.paths, args.steps))
    sigma = np.ones(args.workers)
    weights = np.concatenate(([1.0], np.full(args.workers - 1, 0.05)))

    t_np = bench(kernels.accrue_block_numpy, dw, sigma, weights, args.repeats)
    print(f"numpy  backend: {t_np * 1e3:8.2f} ms per block "
          f"({dw.size / t_np / 1e9:.2f} Gelem/s)")

    if kernels.BACKEND == "numba":
        t_nb = bench(kernels.accrue_block, dw, sigma, weights, args.repeats)
        print(f"numba  backend: {t_nb * 1e3:8.2f} ms per block "
              f"({dw.size / t_nb / 1e9:.2f} Gelem/s)")
        print(f"speedup: {t_np / t_nb:.2f}x")
        a = kernels.accrue_block(dw, sigma, weights)
        b = kernels.accrue_block_numpy(dw, sigma, weights)
        worst = max(float(np.max(np.abs(x - y))) for x, y in zip(a, b))
        print(f"max |numba - numpy| over outputs: {worst:.3e}")
    else:
        print("numba backend unavailable (HIERCON_DISABLE_NUMBA set or import failed)")


if __name__ == "__main__":
    main()
