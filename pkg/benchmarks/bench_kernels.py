"""Time each hot kernel's numba build against the numpy fallback.

Run from the repo root:

    python3 benchmarks/bench_kernels.py [--repeats 5]

Sizes mirror the synthetic benchmark's working set (100k windows of
6-dim stat features, 50-bin histograms over full windows). The numba
variants are compiled once before timing so the table shows steady-state
cost, not compilation.
"""

import argparse
import time

import numpy as np

from evogene import kernels as K
from evogene.backend import HAS_NUMBA


def best_of(fn, args, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    points = rng.normal(size=(100_000, 6))
    centroids = rng.normal(size=(5, 6))
    labels = rng.integers(0, 5, size=100_000)
    sil_pts = rng.normal(size=(4000, 6))
    sil_labels = rng.integers(0, 5, size=4000)
    values = rng.normal(size=400_000)
    queries = rng.normal(size=(500, 600))
    corpus = rng.normal(size=(5000, 600))

    cases = [
        ("kmeans_assign", "kmeans_assign", (points, centroids)),
        ("kmeans_update", "kmeans_update", (points, labels, 5)),
        ("silhouette_dsums", "silhouette_dsums", (sil_pts, sil_labels, 5)),
        ("histogram_counts", "histogram_counts", (values, -4.0, 4.0, 50)),
        ("nn1_indices", "nn1_indices", (queries, corpus)),
    ]

    if not HAS_NUMBA:
        print("numba unavailable; timing the numpy fallback only")
    header = f"{'kernel':<20} {'numpy':>10} {'numba':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, attr, call_args in cases:
        np_fn = getattr(K, f"_{attr}_np")
        t_np = best_of(np_fn, call_args, args.repeats)
        if HAS_NUMBA:
            nb_fn = getattr(K, f"_{attr}_nb")
            nb_fn(*call_args)  # compile outside the timed region
            t_nb = best_of(nb_fn, call_args, args.repeats)
            print(f"{name:<20} {t_np * 1e3:>8.2f}ms {t_nb * 1e3:>8.2f}ms "
                  f"{t_np / t_nb:>7.2f}x")
        else:
            print(f"{name:<20} {t_np * 1e3:>8.2f}ms {'-':>10} {'-':>8}")


if __name__ == "__main__":
    main()
