"""Benchmark the numba geometry kernels against the pure-numpy fallback.

Times farthest point sampling, ball query, and knn on one random cloud and
checks that both backends return identical results. Run from the repo root:

    python3 benchmarks/bench_kernels.py --points 2048 --centers 512
"""

import argparse
import statistics
import time

import numpy as np

from pcnet.geom import _numpy_kernels

try:
    from pcnet.geom import _numba_kernels
except ImportError:
    _numba_kernels = None


def time_op(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=2048)
    ap.add_argument("--centers", type=int, default=512)
    ap.add_argument("--k", type=int, default=32)
    ap.add_argument("--radius", type=float, default=0.2)
    ap.add_argument("--repeats", type=int, default=7)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    pts = rng.normal(size=(args.points, 3))
    pts /= np.abs(pts).max()
    pts = np.ascontiguousarray(pts)
    centers = _numpy_kernels.fps(pts, args.centers, 0)
    r2 = args.radius * args.radius

    ops = {
        "fps": lambda kern: kern.fps(pts, args.centers, 0),
        "ball": lambda kern: kern.ball(pts, centers, r2, args.k),
        "knn": lambda kern: kern.knn(pts, centers, args.k),
    }

    print(f"cloud: {args.points} points, {args.centers} centers, "
          f"k={args.k}, radius={args.radius}")
    if _numba_kernels is None:
        print("numba not importable; timing the numpy fallback only")

    header = f"{'op':<6} {'numpy':>12} {'numba':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, call in ops.items():
        ref = call(_numpy_kernels)
        t_np = time_op(lambda: call(_numpy_kernels), args.repeats)
        if _numba_kernels is None:
            print(f"{name:<6} {t_np * 1e3:>10.3f}ms {'-':>12} {'-':>9}")
            continue
        call(_numba_kernels)  # compile before timing
        t_nb = time_op(lambda: call(_numba_kernels), args.repeats)
        got = call(_numba_kernels)
        if isinstance(ref, tuple):
            same = all(np.array_equal(a, b) for a, b in zip(ref, got))
        else:
            same = np.array_equal(ref, got)
        mark = "" if same else "  RESULTS DIFFER"
        print(f"{name:<6} {t_np * 1e3:>10.3f}ms {t_nb * 1e3:>10.3f}ms "
              f"{t_np / t_nb:>8.1f}x{mark}")


if __name__ == "__main__":
    main()
