"""Clustering init, classifier behavior, and the refinement loop."""

import numpy as np
import pytest
from sklearn.cluster import KMeans as SkKMeans
from sklearn.metrics import homogeneity_score

from evogene.data import DatasetMeta, Sample, SeriesDataset, generate_synthetic
from evogene.errors import DataError, DimensionError
from evogene.recognition import (
    GeneAssignment,
    assignment_error_rate,
    classifier_apply,
    classifier_forward,
    init_assignment,
    kmeans_fit,
    new_classifier,
    recognition_refine,
    save_assignment_csv,
    train_classifier,
)


def mean_separated_ds(n_per=40, K=3, W=2, T=6, S=1, seed=0):
    """Clusters at means 10/20/30 with tiny noise: linearly separable."""
    rng = np.random.default_rng(seed)
    samples = []
    for k in range(K):
        base = 10.0 * (k + 1)
        for j in range(n_per):
            w = base + 0.5 * rng.normal(size=(W, T, S))
            samples.append(Sample(id=f"m{k}-{j}", windows=w, label=k))
    meta = DatasetMeta(W=W, T=T, S=S, classes=tuple(range(K)))
    ds = SeriesDataset(samples, meta)
    window_labels = np.repeat([s.label for s in samples], W)
    return ds, window_labels


# ------------------------------------------------------------------ k-means

def test_kmeans_two_blobs():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(30, 2)) * 0.1
    b = rng.normal(size=(30, 2)) * 0.1 + 10.0
    pts = np.vstack([a, b])
    centroids, labels = kmeans_fit(pts, 2, seed=1)
    dists = np.linalg.norm(
        np.sort(centroids, axis=0) - np.array([[0.0, 0.0], [10.0, 10.0]]), axis=1
    )
    assert dists.max() < 0.5
    assert len(set(labels[:30].tolist())) == 1
    assert len(set(labels[30:].tolist())) == 1
    assert labels[0] != labels[-1]


def test_kmeans_k1_is_global_mean():
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(50, 3))
    centroids, labels = kmeans_fit(pts, 1, seed=0)
    np.testing.assert_allclose(centroids[0], pts.mean(axis=0), atol=1e-12)
    assert set(labels.tolist()) == {0}


def test_kmeans_identical_points_no_crash():
    pts = np.ones((10, 2))
    centroids, labels = kmeans_fit(pts, 2, seed=0)
    assert np.bincount(labels, minlength=2).max() == 10


def test_kmeans_k_too_large():
    with pytest.raises(DataError):
        kmeans_fit(np.zeros((3, 2)), 4, seed=0)


def test_kmeans_competitive_with_sklearn():
    rng = np.random.default_rng(7)
    pts = np.vstack([rng.normal(size=(40, 2)) + c for c in (0.0, 6.0, 12.0)])

    def inertia(centroids, labels):
        return float(np.sum((pts - centroids[labels]) ** 2))

    c_mine, l_mine = kmeans_fit(pts, 3, seed=5)
    sk = SkKMeans(n_clusters=3, n_init=10, random_state=0).fit(pts)
    assert inertia(c_mine, l_mine) <= sk.inertia_ * 1.05


def test_kmeans_deterministic():
    rng = np.random.default_rng(4)
    pts = rng.normal(size=(60, 4))
    a = kmeans_fit(pts, 4, seed=9)
    b = kmeans_fit(pts, 4, seed=9)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


# --------------------------------------------------------------- assignment

def test_assignment_validation():
    with pytest.raises(DimensionError):
        GeneAssignment(np.full((2, 3, 2), 0.7))
    ga = GeneAssignment(np.full((2, 3, 2), 0.5))
    assert ga.hard.shape == (2, 3)
    assert set(ga.hard.ravel().tolist()) == {0}


def test_assignment_from_hard_round_trip():
    hard = np.array([[0, 2], [1, 1]])
    ga = GeneAssignment.from_hard(hard, 3)
    np.testing.assert_array_equal(ga.hard, hard)
    assert ga.flat_probs().shape == (4, 3)


def test_init_assignment_separates_constant_groups():
    samples = []
    for j in range(10):
        v = 0.0 if j < 5 else 100.0
        samples.append(Sample(id=f"s{j}", windows=np.full((2, 4, 1), v)))
    ds = SeriesDataset(samples, DatasetMeta(W=2, T=4, S=1))
    ga = init_assignment(ds, 2, seed=0)
    low = set(ga.hard[:5].ravel().tolist())
    high = set(ga.hard[5:].ravel().tolist())
    assert len(low) == 1 and len(high) == 1 and low != high


def test_init_assignment_k1():
    ds, _ = mean_separated_ds(n_per=5)
    ga = init_assignment(ds, 1, seed=0)
    assert set(ga.hard.ravel().tolist()) == {0}


def test_init_assignment_disjoint_sigma_fixture_homogeneity():
    # variance levels spaced so the estimator spread at T=200 stays far
    # inside the gaps between clusters
    ds, truth = generate_synthetic(
        n_clusters=3,
        samples_per_cluster=60,
        W=3,
        T=200,
        S=1,
        seed=13,
        mu_range=(25.0, 25.0),
        sigma_ranges=[(9.9, 10.1), (15.7, 15.9), (22.3, 22.5)],
    )
    ga = init_assignment(ds, 3, seed=1)
    window_truth = np.repeat(truth, 3)
    assert homogeneity_score(window_truth, ga.flat_hard()) >= 0.9


# --------------------------------------------------------------- classifier

def test_classifier_zero_final_layer_is_uniform():
    ds, _ = mean_separated_ds(n_per=4)
    clf = new_classifier(ds, K=3, seed=0)
    clf.params["w_out"].data[:] = 0.0
    probs = classifier_apply(clf, ds.segments())
    np.testing.assert_allclose(probs, 1.0 / 3.0, atol=1e-12)


def test_classifier_rows_sum_to_one():
    ds, _ = mean_separated_ds(n_per=6, seed=3)
    clf = new_classifier(ds, K=3, seed=5)
    probs = classifier_apply(clf, ds.segments())
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)
    assert probs.min() >= 0.0


def test_classifier_learns_separable_fixture():
    ds, window_labels = mean_separated_ds(n_per=40, seed=1)
    clf = new_classifier(ds, K=3, seed=2)
    losses = train_classifier(
        clf, ds.segments(), window_labels,
        epochs=40, lr=0.05, batch_size=50, seed=0,
    )
    assert losses[-1] < losses[0]
    pred = classifier_apply(clf, ds.segments()).argmax(axis=1)
    assert np.mean(pred == window_labels) >= 0.99


def test_classifier_rejects_bad_shape():
    ds, _ = mean_separated_ds(n_per=3)
    clf = new_classifier(ds, K=3, seed=0)
    with pytest.raises(DimensionError):
        classifier_forward(clf, np.zeros((2, 5, 1)))


# --------------------------------------------------------------- error rate

def test_error_rate_trivials():
    a = GeneAssignment.from_hard(np.array([[0, 1], [1, 0]]), 2)
    b = GeneAssignment.from_hard(np.array([[1, 0], [0, 1]]), 2)
    c = GeneAssignment.from_hard(np.array([[0, 1], [0, 1]]), 2)
    assert assignment_error_rate(a, a) == 0.0
    assert assignment_error_rate(a, b) == 1.0
    assert assignment_error_rate(a, c) == 0.5


def test_error_rate_shape_mismatch():
    a = GeneAssignment.from_hard(np.zeros((2, 2), dtype=int), 2)
    b = GeneAssignment.from_hard(np.zeros((2, 3), dtype=int), 2)
    with pytest.raises(DimensionError):
        assignment_error_rate(a, b)


# --------------------------------------------------------------- refinement

def test_refine_tol_one_keeps_kmeans_init():
    ds, _ = mean_separated_ds(n_per=10, seed=4)
    res = recognition_refine(
        ds, K=3, seed=6, max_outer=5, epochs_per_round=2, tol=1.0, batch_size=20
    )
    init = init_assignment(ds, 3, seed=6)
    np.testing.assert_array_equal(res.assignment.hard, init.hard)
    np.testing.assert_array_equal(res.init_hard, init.hard)
    assert len(res.error_rates) == 1


def test_refine_history_bounded_and_valid():
    ds, _ = mean_separated_ds(n_per=10, seed=8)
    res = recognition_refine(
        ds, K=3, seed=0, max_outer=3, epochs_per_round=3, tol=0.0, batch_size=20
    )
    assert 1 <= len(res.error_rates) <= 3
    assert all(0.0 <= e <= 1.0 for e in res.error_rates)
    assert len(res.round_hard) == len(res.error_rates)
    assert res.assignment.hard.shape == (len(ds), ds.meta.W)


def test_refine_keeps_separable_fixture_clean():
    ds, window_labels = mean_separated_ds(n_per=30, seed=2)
    res = recognition_refine(
        ds, K=3, seed=1, max_outer=3, epochs_per_round=15, tol=0.01, batch_size=30
    )
    h_init = homogeneity_score(window_labels, res.init_hard.ravel())
    h_final = homogeneity_score(window_labels, res.assignment.flat_hard())
    assert h_init >= 0.9
    assert h_final >= 0.9


# ------------------------------------------------------------------- export

def test_save_assignment_csv(tmp_path):
    ds, _ = mean_separated_ds(n_per=2)
    ga = init_assignment(ds, 2, seed=0)
    path = str(tmp_path / "a.csv")
    save_assignment_csv(ds, ga, path)
    lines = open(path).read().strip().split("\n")
    assert lines[0] == "sample_id,window_index,hard_gene,p_0,p_1"
    assert len(lines) == 1 + len(ds) * ds.meta.W
    first = lines[1].split(",")
    assert first[0] == ds.samples[0].id
    assert first[1] == "0"
    assert first[2] in {"0", "1"}
    for line in lines[1:]:
        cells = line.split(",")
        probs = [float(c) for c in cells[3:]]
        assert abs(sum(probs) - 1.0) < 1e-9
