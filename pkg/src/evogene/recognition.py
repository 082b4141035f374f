"""Gene recognition: clustering init, sequence classifier, refinement loop.

Windows are first grouped by k-means on their per-variable (mean,
variance) statistics. A recurrent classifier is then trained on those
hard labels and used to relabel every window; the loop repeats until the
fraction of relabeled windows falls under a tolerance or the round cap
is hit.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .data import SeriesDataset, batches, window_features
from .errors import DataError, DimensionError
from .kernels import kmeans_assign, kmeans_update
from .numcore import (
    ParamStore,
    Rng,
    Tensor,
    affine,
    loss_cross_entropy,
    no_grad,
    rnn_cell,
    sgd_step,
)
from .numcore import tensor as T


class GeneAssignment:
    """Per-sample, per-window probability rows over K genes.

    hard[i, w] is the argmax gene (ties resolve to the lowest index).
    """

    def __init__(self, probs: np.ndarray):
        probs = np.asarray(probs, dtype=np.float64)
        if probs.ndim != 3:
            raise DimensionError(
                f"assignment probs must be (n, W, K), got {probs.shape}"
            )
        if probs.min() < 0.0 or probs.max() > 1.0 + 1e-9:
            raise DimensionError("assignment probs outside [0, 1]")
        sums = probs.sum(axis=2)
        if not np.allclose(sums, 1.0, atol=1e-9):
            raise DimensionError("assignment rows must sum to 1")
        self.probs = probs
        self.hard = probs.argmax(axis=2)

    @property
    def K(self) -> int:
        return self.probs.shape[2]

    @property
    def shape(self):
        return self.hard.shape

    def flat_probs(self) -> np.ndarray:
        n, w, k = self.probs.shape
        return self.probs.reshape(n * w, k)

    def flat_hard(self) -> np.ndarray:
        return self.hard.reshape(-1)

    @classmethod
    def from_hard(cls, hard: np.ndarray, K: int) -> "GeneAssignment":
        hard = np.asarray(hard, dtype=np.int64)
        if hard.size and (hard.min() < 0 or hard.max() >= K):
            raise DimensionError("hard label out of range")
        probs = np.zeros(hard.shape + (K,))
        n, w = hard.shape
        probs[np.arange(n)[:, None], np.arange(w)[None, :], hard] = 1.0
        return cls(probs)


def kmeans_fit(points, K: int, seed: int, max_iter: int = 100):
    """Lloyd's algorithm with k-means++ seeding.

    Returns (centroids (K, d), labels (n,)). Empty clusters are re-seeded
    to the point farthest from its current centroid, deterministically.
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise DimensionError(f"points must be (n, d), got {pts.shape}")
    n = pts.shape[0]
    if K < 1 or K > n:
        raise DataError(f"need 1 <= K <= {n} points, got K={K}")

    rng = Rng(seed)
    centroids = np.empty((K, pts.shape[1]))
    centroids[0] = pts[rng.integer(n)]
    d2 = np.sum((pts - centroids[0]) ** 2, axis=1)
    for k in range(1, K):
        centroids[k] = pts[rng.choice_weighted(d2)]
        d2 = np.minimum(d2, np.sum((pts - centroids[k]) ** 2, axis=1))

    labels = kmeans_assign(pts, centroids)
    for _ in range(max_iter):
        sums, counts = kmeans_update(pts, labels, K)
        own = np.sum((pts - centroids[labels]) ** 2, axis=1)
        for k in range(K):
            if counts[k] == 0:
                far = int(np.argmax(own))
                centroids[k] = pts[far]
                own[far] = 0.0
            else:
                centroids[k] = sums[k] / counts[k]
        new_labels = kmeans_assign(pts, centroids)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return centroids, labels


def init_assignment(ds: SeriesDataset, K: int, seed: int) -> GeneAssignment:
    """One-hot assignment from k-means over all windows' stat features."""
    feats = window_features(ds)
    _, labels = kmeans_fit(feats, K, seed)
    return GeneAssignment.from_hard(labels.reshape(len(ds), ds.meta.W), K)


@dataclass
class ClassifierC:
    """Recurrent gene classifier: RNN over T steps, affine to K logits."""

    params: ParamStore
    T: int
    S: int
    K: int
    hidden: int = 32


def input_stats(ds: SeriesDataset) -> tuple[np.ndarray, np.ndarray]:
    """Per-variable mean and std over every value, floored for stability."""
    x = ds.stacked()
    mean = x.mean(axis=(0, 1, 2))
    std = np.maximum(x.std(axis=(0, 1, 2)), 1e-8)
    return mean, std


def new_classifier(
    ds: SeriesDataset, K: int, seed: int, hidden: int = 32
) -> ClassifierC:
    m = ds.meta
    store = ParamStore(seed, key=(3,))
    mean, std = input_stats(ds)
    store.buffer("in_mean", mean.reshape(1, m.S))
    store.buffer("in_std", std.reshape(1, m.S))
    store.matrix("w_in", m.S, hidden)
    store.matrix("w_rec", hidden, hidden)
    store.bias("b_rec", (1, hidden))
    store.matrix("w_out", hidden, K)
    store.bias("b_out", (1, K))
    return ClassifierC(params=store, T=m.T, S=m.S, K=K, hidden=hidden)


def classifier_forward(C: ClassifierC, segments: np.ndarray) -> Tensor:
    """Probability rows (B, K) as a graph node for training."""
    seg = np.asarray(segments, dtype=np.float64)
    if seg.ndim != 3 or seg.shape[1:] != (C.T, C.S):
        raise DimensionError(
            f"segments must be (B, {C.T}, {C.S}), got {seg.shape}"
        )
    p = C.params
    mean, std = p["in_mean"].data, p["in_std"].data
    h = Tensor(np.zeros((seg.shape[0], C.hidden)))
    for t in range(C.T):
        xt = Tensor((seg[:, t, :] - mean) / std)
        h = rnn_cell(xt, h, p["w_in"], p["w_rec"], p["b_rec"])
    return T.softmax_rows(affine(h, p["w_out"], p["b_out"]))


def classifier_apply(
    C: ClassifierC, segments: np.ndarray, chunk: int = 8192
) -> np.ndarray:
    """Probability rows (B, K) without recording gradients."""
    seg = np.asarray(segments, dtype=np.float64)
    out = []
    with no_grad():
        for i in range(0, seg.shape[0], chunk):
            out.append(classifier_forward(C, seg[i:i + chunk]).data)
    return np.concatenate(out, axis=0)


def train_classifier(
    C: ClassifierC,
    segments: np.ndarray,
    labels: np.ndarray,
    epochs: int,
    lr: float,
    batch_size: int,
    seed: int,
    epoch_offset: int = 0,
) -> list[float]:
    """Cross-entropy training on hard labels; returns per-epoch mean loss."""
    labels = np.asarray(labels, dtype=np.int64)
    history = []
    for e in range(epochs):
        total, count = 0.0, 0
        for idx in batches(segments.shape[0], batch_size, seed, epoch_offset + e):
            probs = classifier_forward(C, segments[idx])
            loss = loss_cross_entropy(probs, labels[idx])
            loss.backward()
            sgd_step(C.params, lr)
            total += float(loss.data) * len(idx)
            count += len(idx)
        history.append(total / count)
    return history


def assignment_error_rate(old: GeneAssignment, new: GeneAssignment) -> float:
    """Fraction of windows whose hard gene changed."""
    if old.hard.shape != new.hard.shape:
        raise DimensionError(
            f"assignment shapes differ: {old.hard.shape} vs {new.hard.shape}"
        )
    return float(np.mean(old.hard != new.hard))


@dataclass
class RefineResult:
    assignment: GeneAssignment
    classifier: ClassifierC
    error_rates: list[float]
    init_hard: np.ndarray = None
    round_hard: list[np.ndarray] = field(default_factory=list)


def recognition_refine(
    ds: SeriesDataset,
    K: int,
    seed: int,
    max_outer: int = 5,
    epochs_per_round: int = 10,
    lr: float = 0.01,
    tol: float = 0.01,
    batch_size: int = 2000,
) -> RefineResult:
    """Alternate classifier training and relabeling until stable.

    Each round trains the (warm-started) classifier on the current hard
    labels, relabels every window by its argmax, and measures the changed
    fraction. When that fraction is within tol the current labels are
    kept (so tol=1 returns the k-means initialization untouched);
    otherwise the relabeling is adopted and the loop continues, at most
    max_outer rounds. Per-round relabelings are kept for diagnostics.
    """
    segments = ds.segments()
    assignment = init_assignment(ds, K, seed)
    clf = new_classifier(ds, K, seed, hidden=32)
    error_rates: list[float] = []
    round_hard: list[np.ndarray] = []
    init_hard = assignment.hard.copy()

    for r in range(max_outer):
        train_classifier(
            clf,
            segments,
            assignment.flat_hard(),
            epochs=epochs_per_round,
            lr=lr,
            batch_size=batch_size,
            seed=seed,
            epoch_offset=r * epochs_per_round,
        )
        probs = classifier_apply(clf, segments)
        relabeled = GeneAssignment(probs.reshape(len(ds), ds.meta.W, K))
        err = assignment_error_rate(assignment, relabeled)
        error_rates.append(err)
        round_hard.append(relabeled.hard.copy())
        if err <= tol:
            break
        assignment = relabeled

    return RefineResult(
        assignment=assignment,
        classifier=clf,
        error_rates=error_rates,
        init_hard=init_hard,
        round_hard=round_hard,
    )


def save_assignment_csv(ds: SeriesDataset, assignment: GeneAssignment, path: str):
    """CSV export: sample_id,window_index,hard_gene,p_0,...,p_{K-1}."""
    if assignment.hard.shape != (len(ds), ds.meta.W):
        raise DimensionError("assignment does not cover the dataset")
    K = assignment.K
    header = "sample_id,window_index,hard_gene," + ",".join(
        f"p_{k}" for k in range(K)
    )
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(header + "\n")
        for i, s in enumerate(ds.samples):
            for w in range(ds.meta.W):
                probs = ",".join(repr(float(p)) for p in assignment.probs[i, w])
                f.write(f"{s.id},{w},{assignment.hard[i, w]},{probs}\n")
    os.replace(tmp, path)
