"""Time the numba kernels against their numpy reference versions.

    python benchmarks/bench_kernels.py [--sizes 64 256 1024] [--repeat 5]

Each kernel is run once to warm up the JIT, then timed ``--repeat`` times; the
best time is reported.  Results are checked for equality before timing.
"""

import argparse
import time

import numpy as np

from quantk import _accel


def grid_distance(n):
    side = int(np.ceil(np.sqrt(n)))
    pts = np.array([(i // side, i % side) for i in range(n)])
    return np.abs(pts[:, None, :] - pts[None, :, :]).sum(-1).astype(float)


def cases(n, rng):
    dist = grid_distance(n)
    k = 2
    T = rng.standard_normal((n * k, n * k))
    T[np.repeat(np.repeat(dist > 3, k, 0), k, 1)] = 0.0
    member = np.stack([dist[c] < 3 for c in rng.choice(n, size=max(2, n // 8), replace=False)])
    member[0] |= ~member.any(axis=0)
    numer = rng.random((n, n))
    A = (rng.random((n, n)) < 2.0 / n) & ~np.eye(n, dtype=bool)
    rows, cols = np.nonzero(A)
    return {
        "propagation_scan": (np.abs(T), dist, k, 1e-12),
        "complement_distance": (dist, member),
        "ball_hit_counts": (dist, member, 2.0),
        "max_ratio": (numer, dist),
        "peel": (n, rows, cols),
    }


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 256, 1024])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _accel.NUMBA_AVAILABLE:
        raise SystemExit("numba is not installed; nothing to compare")

    rng = np.random.default_rng(0)
    print(f"{'kernel':<22}{'n':>6}{'numpy [ms]':>13}{'numba [ms]':>13}{'speed-up':>10}")
    for n in args.sizes:
        for name, inputs in cases(n, rng).items():
            f_np = getattr(_accel, name + "_np")
            f_nb = getattr(_accel, name + "_nb")
            a, b = f_np(*inputs), f_nb(*inputs)  # also compiles
            assert np.array_equal(np.asarray(a), np.asarray(b)), name
            t_np = best_of(f_np, inputs, args.repeat)
            t_nb = best_of(f_nb, inputs, args.repeat)
            print(f"{name:<22}{n:>6}{1e3 * t_np:>13.3f}{1e3 * t_nb:>13.3f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
