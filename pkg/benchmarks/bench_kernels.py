"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5] [--end-to-end]

Each kernel is called once untimed (so numba compiles or loads its cache),
then timed ``--repeat`` times; the table shows the median wall time of each
variant, the speedup and the largest absolute difference between outputs.
``--end-to-end`` also times one quartic-sine IDEAL run in a fresh process
with and without ``IDEAL_DISABLE_NUMBA``.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from ideal import kernels
from ideal.predictor import init_params, layer_sizes


def _median_time(fn, args, repeat):
    out = fn(*args)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return float(np.median(times)), out


def _max_diff(a, b):
    if isinstance(a, tuple):
        return max(_max_diff(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape:
        return float("inf")
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def cases(rng):
    pool = rng.uniform(-1, 1, (1000, 2))
    S = rng.uniform(-1, 1, (60, 2))
    feasible = (rng.random(60) < 0.8).astype(np.int64)
    Y = rng.normal(size=(60, 3))
    Yhat = rng.normal(size=(1000, 3))

    X = rng.uniform(-2, 2, (30, 1))
    T = (X ** 4 * np.sin(X ** 2 / 3)) / 10
    sizes = layer_sizes(1, (5, 5), 1)
    theta = init_params(sizes, rng)

    return [
        ("min_sq_dist 1000x60", "min_sq_dist", (pool, S)),
        ("knn_mean_dist 1000, k=1000", "knn_mean_dist", (rng.uniform(-1, 1, (1001, 2)), 1000)),
        ("idw_terms 1000x60, m=3", "idw_terms", (pool, S, feasible, Y, Yhat, True, 1e-12)),
        ("mlp_loss_grad 5x5, N=30", "mlp_loss_grad", (theta, sizes, X, T, 0, 0, 1e-2)),
        ("adam_fit 5x5, N=30, 3000 ep", "adam_fit",
         (theta, sizes, X, T, 0, 0, 1e-2, 0.01, 3000, 0.0)),
    ]


def end_to_end():
    code = ("import time; from ideal.bench import ExperimentConfig, run_single;"
            "run_single(ExperimentConfig(runs=1, n_max=8), 0);"
            "t=time.perf_counter(); run_single(ExperimentConfig(runs=1), 0);"
            "print(time.perf_counter()-t)")
    out = {}
    for label, flag in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, IDEAL_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                             text=True, check=True)
        out[label] = float(res.stdout.strip().splitlines()[-1])
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--end-to-end", action="store_true")
    args = ap.parse_args(argv)

    if kernels.numba is None:
        print("numba is not installed; nothing to compare")
        return 1
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':32s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s} {'max |diff|':>11s}")
    for label, name, call_args in cases(rng):
        t_np, r_np = _median_time(getattr(kernels, name + "_np"), call_args, args.repeat)
        t_nb, r_nb = _median_time(getattr(kernels, name + "_nb"), call_args, args.repeat)
        print(f"{label:32s} {1e3 * t_np:11.3f} {1e3 * t_nb:11.3f} {t_np / t_nb:8.1f} "
              f"{_max_diff(r_np, r_nb):11.2e}")
    if args.end_to_end:
        e2e = end_to_end()
        print(f"\none quartic-sine IDEAL run (N_max=30): numpy {e2e['numpy']:.2f} s, "
              f"numba {e2e['numba']:.2f} s, speedup {e2e['numpy'] / e2e['numba']:.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
