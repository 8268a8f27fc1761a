"""Compare the compiled Shapley-aggregation kernel against the NumPy fallback.

Usage: python benchmarks/bench_kernels.py [--m 8 12 16] [--batch 256] [--repeat 5]

Both backends run on identical inputs; the best-of-N wall time per backend
is reported together with the speedup and a max-abs-difference sanity check.
"""

import argparse
import time

import numpy as np

from condshap.engine import weight_table
from condshap.kernels import pure

try:
    from condshap import _fastkernels as fast
except ImportError:
    fast = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--m", type=int, nargs="+", default=[8, 12, 16])
    parser.add_argument("--batch", type=int, default=256, help="instances per table batch")
    parser.add_argument("--repeat", type=int, default=5, help="take the best of this many runs")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if fast is None:
        print("compiled extension not importable; timing the fallback only")

    rng = np.random.default_rng(args.seed)
    print(f"{'M':>3} {'tables':>7} {'pure':>12} {'compiled':>12} {'speedup':>8}  check")
    for m in args.m:
        values = rng.normal(size=(args.batch, 1 << m))
        weights = weight_table(m)

        t_pure, out_pure = best_of(
            lambda: pure.shapley_aggregate_batch(values, weights, m), args.repeat
        )
        if fast is None:
            print(f"{m:>3} {args.batch:>7} {t_pure * 1e3:>10.2f}ms {'-':>12} {'-':>8}")
            continue
        t_fast, out_fast = best_of(
            lambda: fast.shapley_aggregate_batch(values, weights, m), args.repeat
        )
        diff = float(np.abs(out_pure - out_fast).max())
        print(
            f"{m:>3} {args.batch:>7} {t_pure * 1e3:>10.2f}ms {t_fast * 1e3:>10.2f}ms "
            f"{t_pure / t_fast:>7.1f}x  max|diff|={diff:.1e}"
        )


if __name__ == "__main__":
    main()
