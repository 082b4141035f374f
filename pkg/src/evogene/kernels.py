"""Hot non-BLAS kernels, in numba and pure-numpy variants.

Each kernel has a loop implementation (``*_loop``, numba-compiled when
available) and a vectorized numpy fallback (``*_np``). The public name
dispatches on the backend selected in :mod:`evogene.backend`. Matrix
products everywhere else in the package stay on numpy's BLAS; these are
the loops BLAS does not cover.
"""

from __future__ import annotations

import numpy as np

from .backend import HAS_NUMBA, USE_NUMBA, njit


# ---------------------------------------------------------------- k-means

def _kmeans_assign_loop(points, centroids):
    n, d = points.shape
    k = centroids.shape[0]
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        best = 0
        best_d = np.inf
        for c in range(k):
            acc = 0.0
            for j in range(d):
                diff = points[i, j] - centroids[c, j]
                acc += diff * diff
            if acc < best_d:
                best_d = acc
                best = c
        labels[i] = best
    return labels


def _kmeans_assign_np(points, centroids):
    # ||x-c||^2 = ||x||^2 - 2 x.c + ||c||^2; argmin unaffected by ||x||^2
    cross = points @ centroids.T
    c_sq = np.einsum("ij,ij->i", centroids, centroids)
    return np.argmin(c_sq[None, :] - 2.0 * cross, axis=1)


def _kmeans_update_loop(points, labels, k):
    n, d = points.shape
    sums = np.zeros((k, d))
    counts = np.zeros(k, dtype=np.int64)
    for i in range(n):
        c = labels[i]
        counts[c] += 1
        for j in range(d):
            sums[c, j] += points[i, j]
    return sums, counts


def _kmeans_update_np(points, labels, k):
    d = points.shape[1]
    sums = np.zeros((k, d))
    np.add.at(sums, labels, points)
    counts = np.bincount(labels, minlength=k).astype(np.int64)
    return sums, counts


# ------------------------------------------------------------- silhouette

def _silhouette_dsums_loop(points, labels, k):
    """Per point, summed Euclidean distance to every cluster.

    Returns (n, k) distance sums; the silhouette a/b terms are derived from
    them with cluster counts. O(n^2 d) pairwise sweep.
    """
    n, d = points.shape
    dsums = np.zeros((n, k))
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for m in range(d):
                diff = points[i, m] - points[j, m]
                acc += diff * diff
            dist = np.sqrt(acc)
            dsums[i, labels[j]] += dist
            dsums[j, labels[i]] += dist
    return dsums


def _silhouette_dsums_np(points, labels, k):
    n = points.shape[0]
    dsums = np.zeros((n, k))
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0
    step = max(1, int(2e7) // max(n, 1))
    for lo in range(0, n, step):
        hi = min(n, lo + step)
        block = points[lo:hi]
        sq = (
            np.einsum("ij,ij->i", block, block)[:, None]
            - 2.0 * block @ points.T
            + np.einsum("ij,ij->i", points, points)[None, :]
        )
        np.maximum(sq, 0.0, out=sq)
        dsums[lo:hi] = np.sqrt(sq) @ onehot
    return dsums


# -------------------------------------------------------------- histogram

def _histogram_counts_loop(values, lo, hi, bins):
    counts = np.zeros(bins, dtype=np.int64)
    width = (hi - lo) / bins
    for i in range(values.shape[0]):
        v = values[i]
        if v < lo or v > hi:
            continue
        idx = int((v - lo) / width)
        if idx >= bins:  # right edge belongs to the last bin
            idx = bins - 1
        counts[idx] += 1
    return counts


def _histogram_counts_np(values, lo, hi, bins):
    counts, _ = np.histogram(values, bins=bins, range=(lo, hi))
    return counts.astype(np.int64)


# --------------------------------------------------- 1-NN Euclidean lookup

def _nn1_indices_loop(queries, corpus):
    m = queries.shape[0]
    n, d = corpus.shape
    out = np.empty(m, dtype=np.int64)
    for i in range(m):
        best = 0
        best_d = np.inf
        for j in range(n):
            acc = 0.0
            for t in range(d):
                diff = queries[i, t] - corpus[j, t]
                acc += diff * diff
                if acc >= best_d:
                    break
            if acc < best_d:
                best_d = acc
                best = j
        out[i] = best
    return out


def _nn1_indices_np(queries, corpus):
    m = queries.shape[0]
    out = np.empty(m, dtype=np.int64)
    c_sq = np.einsum("ij,ij->i", corpus, corpus)
    step = max(1, int(2e7) // max(corpus.shape[0], 1))
    for lo in range(0, m, step):
        hi = min(m, lo + step)
        block = queries[lo:hi]
        sq = c_sq[None, :] - 2.0 * block @ corpus.T
        out[lo:hi] = np.argmin(sq, axis=1)
    return out


if HAS_NUMBA:
    _kmeans_assign_nb = njit(_kmeans_assign_loop)
    _kmeans_update_nb = njit(_kmeans_update_loop)
    _silhouette_dsums_nb = njit(_silhouette_dsums_loop)
    _histogram_counts_nb = njit(_histogram_counts_loop)
    _nn1_indices_nb = njit(_nn1_indices_loop)

if USE_NUMBA:
    kmeans_assign = _kmeans_assign_nb
    kmeans_update = _kmeans_update_nb
    silhouette_dsums = _silhouette_dsums_nb
    histogram_counts = _histogram_counts_nb
    nn1_indices = _nn1_indices_nb
else:
    kmeans_assign = _kmeans_assign_np
    kmeans_update = _kmeans_update_np
    silhouette_dsums = _silhouette_dsums_np
    histogram_counts = _histogram_counts_np
    nn1_indices = _nn1_indices_np
