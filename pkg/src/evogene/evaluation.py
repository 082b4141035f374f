"""Metric suite and sanity baselines.

Everything here is a pure function of arrays; nothing touches model
state. Rates are returned as fractions in [0, 1] and percentages only
where the metric is defined that way (MAPE).
"""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .data import SeriesDataset, window_features
from .errors import DataError, DimensionError
from .kernels import histogram_counts, nn1_indices, silhouette_dsums
from .numcore import Rng

MAPE_EPS = 1e-8


@dataclass
class MetricReport:
    task: str
    metrics: dict
    per_class: dict | None = None
    seed: int | None = None
    fingerprint: str | None = None
    flags: list = field(default_factory=list)

    def to_json(self) -> str:
        body = {
            "task": self.task,
            "metrics": self.metrics,
            "per_class": self.per_class,
            "seed": self.seed,
            "fingerprint": self.fingerprint,
            "flags": self.flags,
        }
        return json.dumps(body, indent=2, sort_keys=True)


def config_fingerprint(config: dict) -> str:
    """sha256 over the canonical JSON encoding of a config mapping."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def mape(actual, predicted) -> tuple[float, int]:
    """Mean absolute percentage error over entries with |actual| > eps.

    Returns (percentage, number of excluded near-zero entries). Raises
    when every entry is excluded, since the mean is then undefined.
    """
    a = np.asarray(actual, dtype=np.float64)
    p = np.asarray(predicted, dtype=np.float64)
    if a.shape != p.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {p.shape}")
    keep = np.abs(a) > MAPE_EPS
    excluded = int(a.size - keep.sum())
    if not keep.any():
        raise DataError("all actual entries are within eps of zero")
    value = float(np.mean(np.abs(a[keep] - p[keep]) / np.abs(a[keep])))
    return 100.0 * value, excluded


def fbeta_metrics(true_labels, pred_labels, positive, betas=(1.0, 0.5)) -> MetricReport:
    """Binary precision/recall/F-beta/accuracy against one positive class.

    Zero-denominator cases yield 0 for the affected metric and add a
    flag naming it rather than raising.
    """
    t = np.asarray(true_labels)
    p = np.asarray(pred_labels)
    if t.shape != p.shape or t.ndim != 1:
        raise DimensionError(f"label shape mismatch: {t.shape} vs {p.shape}")
    if t.size == 0:
        raise DataError("empty label arrays")
    known = set(np.unique(t)) | set(np.unique(p))
    if positive not in known:
        raise DataError(f"positive class {positive!r} absent from labels")

    tp = int(np.sum((t == positive) & (p == positive)))
    fp = int(np.sum((t != positive) & (p == positive)))
    fn = int(np.sum((t == positive) & (p != positive)))
    flags = []

    if tp + fp == 0:
        precision = 0.0
        flags.append("precision_zero_denominator")
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 0.0
        flags.append("recall_zero_denominator")
    else:
        recall = tp / (tp + fn)

    metrics = {
        "precision": precision,
        "recall": recall,
        "accuracy": float(np.mean(t == p)),
    }
    for beta in betas:
        denom = beta * beta * precision + recall
        if denom == 0.0:
            metrics[f"f{beta:g}"] = 0.0
            flags.append(f"f{beta:g}_zero_denominator")
        else:
            metrics[f"f{beta:g}"] = (
                (1.0 + beta * beta) * precision * recall / denom
            )
    return MetricReport(task="event", metrics=metrics, flags=flags)


def homogeneity(truth_ids, assigned_ids) -> float:
    """1 - H(truth | assigned) / H(truth), and 0 when H(truth) is 0."""
    t = np.asarray(truth_ids).ravel()
    a = np.asarray(assigned_ids).ravel()
    if t.shape != a.shape:
        raise DimensionError(f"id shape mismatch: {t.shape} vs {a.shape}")
    if t.size == 0:
        raise DataError("empty id arrays")
    n = t.size
    _, ti = np.unique(t, return_inverse=True)
    _, ai = np.unique(a, return_inverse=True)
    joint = np.zeros((ti.max() + 1, ai.max() + 1))
    np.add.at(joint, (ti, ai), 1.0)
    pc = joint.sum(axis=1) / n
    h_c = -np.sum(pc[pc > 0] * np.log(pc[pc > 0]))
    if h_c == 0.0:
        return 0.0
    pk = joint.sum(axis=0) / n
    mask = joint > 0
    # H(C|K) = -sum_ck p(c,k) log(p(c,k)/p(k))
    pj = joint / n
    h_ck = -np.sum(
        pj[mask] * (np.log(pj[mask]) - np.log(np.repeat(pk[None, :], joint.shape[0], axis=0)[mask]))
    )
    return float(1.0 - h_ck / h_c)


def silhouette(features, assigned_ids, max_points: int = 4000, seed: int = 0) -> float:
    """Mean silhouette coefficient with Euclidean distances.

    Exact up to max_points; beyond that a seeded subsample keeps the
    pairwise-distance matrix tractable while staying deterministic.
    """
    x = np.asarray(features, dtype=np.float64)
    ids = np.asarray(assigned_ids).ravel()
    if x.ndim != 2 or x.shape[0] != ids.size:
        raise DimensionError(
            f"features {x.shape} do not align with {ids.size} ids"
        )
    if np.unique(ids).size < 2:
        raise DataError("silhouette needs at least 2 clusters")
    if x.shape[0] > max_points:
        pick = Rng(seed).permutation(x.shape[0])[:max_points]
        pick.sort()
        x, ids = x[pick], ids[pick]
        if np.unique(ids).size < 2:
            raise DataError("subsample collapsed to a single cluster")

    uniq, inv = np.unique(ids, return_inverse=True)
    n = x.shape[0]
    inv = inv.astype(np.int64)
    sizes = np.bincount(inv, minlength=uniq.size)
    sums = silhouette_dsums(np.ascontiguousarray(x), inv, uniq.size)

    a = sums[np.arange(n), inv] / np.maximum(sizes[inv] - 1, 1)
    mean_to = sums / sizes[None, :]
    mean_to[np.arange(n), inv] = np.inf
    b = mean_to.min(axis=1)
    denom = np.maximum(a, b)
    scores = np.where(
        (sizes[inv] > 1) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1.0), 0.0
    )
    return float(scores.mean())


def clustering_metrics(
    truth_ids, assigned_ids, features=None, max_points: int = 4000, seed: int = 0
) -> MetricReport:
    """Homogeneity, plus silhouette when feature vectors are supplied."""
    metrics = {"homogeneity": homogeneity(truth_ids, assigned_ids)}
    if features is not None:
        metrics["silhouette"] = silhouette(
            features, assigned_ids, max_points=max_points, seed=seed
        )
    return MetricReport(task="assignment", metrics=metrics)


def empirical_kl(real_values, generated_values, bins: int = 50) -> float:
    """KL(real || generated) between histograms on the union range, nats.

    Counts get add-one smoothing so disjoint supports stay finite.
    """
    r = np.asarray(real_values, dtype=np.float64).ravel()
    g = np.asarray(generated_values, dtype=np.float64).ravel()
    if r.size == 0 or g.size == 0:
        raise DataError("empirical_kl needs non-empty samples on both sides")
    lo = min(r.min(), g.min())
    hi = max(r.max(), g.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    cr = histogram_counts(r, lo, hi, bins)
    cg = histogram_counts(g, lo, hi, bins)
    p = (cr + 1.0) / (r.size + bins)
    q = (cg + 1.0) / (g.size + bins)
    return float(np.sum(p * np.log(p / q)))


def persistence_report(ds: SeriesDataset, seed: int | None = None) -> MetricReport:
    """Forecast each sample's next window as its last observed window."""
    nexts = ds.next_windows()
    if nexts is None:
        raise DataError("dataset has no next windows to score against")
    last = ds.stacked()[:, -1]
    value, excluded = mape(nexts, last)
    return MetricReport(
        task="value",
        metrics={"mape": value, "mape_excluded": float(excluded)},
        seed=seed,
    )


def nn1_report(
    train_ds: SeriesDataset, test_ds: SeriesDataset, seed: int | None = None
) -> MetricReport:
    """1-nearest-neighbour Euclidean classifier on flattened series."""
    if len(train_ds) == 0:
        raise DataError("empty training set")
    y_train = train_ds.labels()
    y_test = test_ds.labels()
    if y_train is None or y_test is None:
        raise DataError("both datasets need labels for the 1NN baseline")
    xtr = train_ds.stacked().reshape(len(train_ds), -1)
    xte = test_ds.stacked().reshape(len(test_ds), -1)
    pred = y_train[nn1_indices(xte, xtr)]
    metrics = {"accuracy": float(np.mean(pred == y_test))}
    per_class = None
    classes = np.unique(y_train)
    if classes.size == 2:
        rep = fbeta_metrics(y_test, pred, positive=classes.max())
        metrics.update(rep.metrics)
    else:
        per_class = {
            str(c): float(np.mean(pred[y_test == c] == c))
            for c in classes
            if np.any(y_test == c)
        }
    return MetricReport(
        task="event", metrics=metrics, per_class=per_class, seed=seed
    )


def baselines(
    ds: SeriesDataset, task: str, train_ds: SeriesDataset | None = None, seed: int | None = None
) -> MetricReport:
    """Sanity baselines: persistence forecast or 1NN event classifier."""
    if task == "value":
        return persistence_report(ds, seed=seed)
    if task == "event":
        if train_ds is None:
            raise DataError("event baseline needs a training set for lookup")
        return nn1_report(train_ds, ds, seed=seed)
    raise DataError(f"unknown baseline task {task!r}")


def assignment_report(
    ds: SeriesDataset, truth_window_ids, assigned_window_ids, seed: int | None = None
) -> MetricReport:
    """Clustering metrics with silhouette on the per-window stat features."""
    feats = window_features(ds)
    rep = clustering_metrics(
        truth_window_ids, assigned_window_ids, features=feats
    )
    rep.seed = seed
    return rep
