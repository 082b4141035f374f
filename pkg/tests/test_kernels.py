"""Backend parity: every kernel's variants agree on the same inputs."""

import numpy as np
import pytest

from evogene import kernels as K
from evogene.backend import HAS_NUMBA, active_backend

rng = np.random.default_rng(42)
POINTS = rng.normal(size=(300, 6)) * np.array([10.0, 10.0, 10.0, 1.0, 1.0, 1.0])
CENTROIDS = rng.normal(size=(5, 6)) * 4.0
LABELS = rng.integers(0, 5, size=300)
VALUES = rng.normal(loc=25.0, scale=5.0, size=2000)


def variants(name):
    """(label, fn) pairs for one kernel: loop reference, numpy, numba."""
    out = [("loop", getattr(K, f"_{name}_loop")),
           ("np", getattr(K, f"_{name}_np"))]
    if HAS_NUMBA:
        out.append(("nb", getattr(K, f"_{name}_nb")))
    return out


def test_active_backend_names_a_real_choice():
    assert active_backend() in ("numba", "numpy")
    if active_backend() == "numba":
        assert HAS_NUMBA


def test_kmeans_assign_variants_agree():
    base = None
    for label, fn in variants("kmeans_assign"):
        got = fn(POINTS, CENTROIDS)
        if base is None:
            base = got
        np.testing.assert_array_equal(got, base, err_msg=label)


def test_kmeans_assign_matches_full_distance_argmin():
    d2 = ((POINTS[:, None, :] - CENTROIDS[None, :, :]) ** 2).sum(axis=2)
    np.testing.assert_array_equal(
        K.kmeans_assign(POINTS, CENTROIDS), d2.argmin(axis=1)
    )


def test_kmeans_update_variants_agree():
    base_sums, base_counts = None, None
    for label, fn in variants("kmeans_update"):
        sums, counts = fn(POINTS, LABELS, 5)
        if base_sums is None:
            base_sums, base_counts = sums, counts
        np.testing.assert_allclose(sums, base_sums, rtol=1e-12, err_msg=label)
        np.testing.assert_array_equal(counts, base_counts, err_msg=label)


def test_kmeans_update_matches_groupby_sum():
    sums, counts = K.kmeans_update(POINTS, LABELS, 5)
    for c in range(5):
        np.testing.assert_allclose(sums[c], POINTS[LABELS == c].sum(axis=0))
        assert counts[c] == int((LABELS == c).sum())


def test_silhouette_dsums_variants_agree():
    pts, labs = POINTS[:120], LABELS[:120]
    base = None
    for label, fn in variants("silhouette_dsums"):
        got = fn(pts, labs, 5)
        if base is None:
            base = got
        np.testing.assert_allclose(got, base, rtol=1e-9, atol=1e-9,
                                   err_msg=label)


def test_silhouette_dsums_matches_pairwise_definition():
    pts, labs = POINTS[:60], LABELS[:60]
    n = len(pts)
    dist = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2))
    want = np.zeros((n, 5))
    for i in range(n):
        for j in range(n):
            if i != j:
                want[i, labs[j]] += dist[i, j]
    np.testing.assert_allclose(K.silhouette_dsums(pts, labs, 5), want)


def test_histogram_counts_variants_agree():
    lo, hi = float(VALUES.min()), float(VALUES.max())
    base = None
    for label, fn in variants("histogram_counts"):
        got = fn(VALUES, lo, hi, 50)
        if base is None:
            base = got
        np.testing.assert_array_equal(got, base, err_msg=label)
    assert base.sum() == VALUES.size


def test_histogram_counts_edges_and_outliers():
    vals = np.array([0.0, 0.25, 0.5, 0.75, 1.0, -0.1, 1.1])
    for label, fn in variants("histogram_counts"):
        got = fn(vals, 0.0, 1.0, 4)
        # right edge joins the last bin, outside values are dropped
        np.testing.assert_array_equal(got, [1, 1, 1, 2], err_msg=label)


def test_nn1_variants_agree():
    queries = rng.normal(size=(80, 6))
    base = None
    for label, fn in variants("nn1_indices"):
        got = fn(queries, POINTS)
        if base is None:
            base = got
        np.testing.assert_array_equal(got, base, err_msg=label)


def test_nn1_matches_full_distance_argmin():
    queries = rng.normal(size=(40, 6))
    d2 = ((queries[:, None, :] - POINTS[None, :, :]) ** 2).sum(axis=2)
    np.testing.assert_array_equal(
        K.nn1_indices(queries, POINTS), d2.argmin(axis=1)
    )


@pytest.mark.skipif(not HAS_NUMBA, reason="numba not installed")
def test_backend_env_flag_forces_numpy():
    import subprocess
    import sys

    code = (
        "from evogene.backend import active_backend;"
        "print(active_backend())"
    )
    out = subprocess.run(
        [sys.executable, "-c", code],
        env={"PATH": "/usr/bin:/bin", "EVOGENE_BACKEND": "numpy"},
        capture_output=True, text=True, cwd="/",
    )
    assert out.stdout.strip() == "numpy"
