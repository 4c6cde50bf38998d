"""Time each hot kernel on the numba path and on the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0]

Both paths are called directly (no env flag needed). Outputs are checked for
bit-identity before timing; the first jit call is excluded as compile time.
"""

import argparse
import timeit

import numpy as np

from costroute import kernels


def cases(scale):
    rng = np.random.default_rng(0)
    n = max(10, int(2000 * scale))
    x = rng.normal(size=(n, 32))
    y = rng.uniform(size=(n, 9))
    q = rng.normal(size=(max(1, n // 4), 32))
    adj = rng.uniform(size=(n * 50, 9))
    costs = np.array([1.5, 41.6, 103.4, 263.3, 361.8, 590.5, 806.0, 1197.0, 3.3])
    img = rng.uniform(size=(max(8, int(256 * scale)), max(8, int(256 * scale)), 3))
    w = np.exp(-(np.arange(-3, 4)[:, None] ** 2 + np.arange(-3, 4)[None, :] ** 2) / 2.0)
    w /= w.sum()
    labels = rng.uniform(size=(8, 4))
    costs4 = np.array([1.0, 2.0, 5.0, 10.0])
    return [
        ("knn_mean_labels", kernels.knn_mean_labels_jit, kernels.knn_mean_labels_numpy, (x, y, q, 25)),
        ("select_routes", kernels.select_routes_jit, kernels.select_routes_numpy, (adj, costs)),
        ("blur_residual", kernels.blur_residual_jit, kernels.blur_residual_numpy, (img, w)),
        ("assignment_sums", kernels.assignment_sums_jit, kernels.assignment_sums_numpy,
         (labels, costs4, 0, 4 ** 8)),
    ]


def same(a, b):
    if isinstance(a, tuple):
        return all(same(u, v) for u, v in zip(a, b))
    return np.asarray(a).tobytes() == np.asarray(b).tobytes()


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scale", type=float, default=1.0)
    args = ap.parse_args()
    if not kernels.HAVE_NUMBA:
        print("numba not installed; only the numpy path exists")
        return
    print(f"{'kernel':<18}{'numba (s)':>12}{'numpy (s)':>12}{'speedup':>10}  identical")
    for name, jit_fn, np_fn, a in cases(args.scale):
        ok = same(jit_fn(*a), np_fn(*a))  # also warms the jit
        t_jit = min(timeit.repeat(lambda: jit_fn(*a), number=1, repeat=args.repeat))
        t_np = min(timeit.repeat(lambda: np_fn(*a), number=1, repeat=args.repeat))
        print(f"{name:<18}{t_jit:>12.5f}{t_np:>12.5f}{t_np / t_jit:>9.1f}x  {ok}")


if __name__ == "__main__":
    main()
