"""Dataset model, synthetic benchmark generation, file I/O, splits, batches.

A dataset is a list of samples sharing one shape contract: every sample
holds `windows`, a (W, T, S) block of W consecutive segments, each segment
being T observations of S variables. Samples optionally carry an integer
event label and/or a (T, S) next-window forecasting target.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .numcore import Rng


@dataclass(frozen=True)
class DatasetMeta:
    W: int
    T: int
    S: int
    classes: tuple[int, ...] = ()
    k_hint: int | None = None

    def __post_init__(self):
        if min(self.W, self.T, self.S) < 1:
            raise DataError(f"meta dimensions must be >= 1, got {self}")


@dataclass
class Sample:
    id: str
    windows: np.ndarray
    label: int | None = None
    next_window: np.ndarray | None = None


class SeriesDataset:
    """Immutable list of samples validated against a shared meta."""

    def __init__(self, samples: list[Sample], meta: DatasetMeta):
        if not samples:
            raise DataError("dataset has no samples")
        shape = (meta.W, meta.T, meta.S)
        has_label = samples[0].label is not None
        has_next = samples[0].next_window is not None
        for s in samples:
            if s.windows.shape != shape:
                raise DataError(
                    f"sample {s.id!r}: windows shape {s.windows.shape}, "
                    f"expected {shape}"
                )
            if not np.all(np.isfinite(s.windows)):
                raise DataError(f"sample {s.id!r}: non-finite value in windows")
            if (s.label is not None) != has_label:
                raise DataError(
                    f"sample {s.id!r}: label presence differs from the rest "
                    "of the dataset"
                )
            if s.label is not None and s.label not in meta.classes:
                raise DataError(
                    f"sample {s.id!r}: label {s.label} not in classes "
                    f"{list(meta.classes)}"
                )
            if (s.next_window is not None) != has_next:
                raise DataError(
                    f"sample {s.id!r}: next-window presence differs from the "
                    "rest of the dataset"
                )
            if s.next_window is not None:
                if s.next_window.shape != (meta.T, meta.S):
                    raise DataError(
                        f"sample {s.id!r}: next window shape "
                        f"{s.next_window.shape}, expected {(meta.T, meta.S)}"
                    )
                if not np.all(np.isfinite(s.next_window)):
                    raise DataError(
                        f"sample {s.id!r}: non-finite value in next window"
                    )
        self.samples = list(samples)
        self.meta = meta
        self._stacked = None

    def __len__(self) -> int:
        return len(self.samples)

    def stacked(self) -> np.ndarray:
        """All windows as one (n, W, T, S) array, cached."""
        if self._stacked is None:
            self._stacked = np.stack([s.windows for s in self.samples])
        return self._stacked

    def segments(self) -> np.ndarray:
        """All windows flattened sample-major to (n*W, T, S).

        Segment index = sample_index * W + window_index.
        """
        n = len(self.samples)
        m = self.meta
        return self.stacked().reshape(n * m.W, m.T, m.S)

    def labels(self) -> np.ndarray | None:
        if self.samples[0].label is None:
            return None
        return np.array([s.label for s in self.samples], dtype=np.int64)

    def next_windows(self) -> np.ndarray | None:
        if self.samples[0].next_window is None:
            return None
        return np.stack([s.next_window for s in self.samples])

    def subset(self, indices) -> "SeriesDataset":
        return SeriesDataset([self.samples[i] for i in indices], self.meta)


@dataclass
class SegmentStats:
    mean: np.ndarray
    variance: np.ndarray


def segment_stats(segment: np.ndarray) -> SegmentStats:
    """Per-variable mean and biased variance (divide by T) of one segment."""
    seg = np.asarray(segment, dtype=np.float64)
    if seg.ndim != 2 or seg.shape[0] < 1:
        raise DataError(f"segment must be (T, S) with T >= 1, got {seg.shape}")
    mean = seg.mean(axis=0)
    variance = np.mean((seg - mean) ** 2, axis=0)
    return SegmentStats(mean=mean, variance=variance)


def window_features(ds: SeriesDataset) -> np.ndarray:
    """(n*W, 2S) array of concat(mean, variance) per window, sample-major."""
    x = ds.stacked()
    mean = x.mean(axis=2)
    variance = np.mean((x - mean[:, :, None, :]) ** 2, axis=2)
    feats = np.concatenate([mean, variance], axis=2)
    n, w, d = feats.shape
    return feats.reshape(n * w, d)


def _cluster_params(
    rng: Rng, n_clusters, S, mu_range, sigma_range, sigma_ranges, per_variable=True
):
    width = S if per_variable else 1
    mu = rng.uniform(mu_range[0], mu_range[1], size=(n_clusters, 2, width))
    if sigma_ranges is None:
        sigma = rng.uniform(
            sigma_range[0], sigma_range[1], size=(n_clusters, 2, width)
        )
    else:
        if len(sigma_ranges) != n_clusters:
            raise DataError(
                f"sigma_ranges needs {n_clusters} (lo, hi) pairs, "
                f"got {len(sigma_ranges)}"
            )
        sigma = np.stack(
            [rng.uniform(lo, hi, size=(2, width)) for lo, hi in sigma_ranges]
        )
    if width == 1:
        mu = np.repeat(mu, S, axis=2)
        sigma = np.repeat(sigma, S, axis=2)
    return mu, sigma


def _mixture_values(rng: Rng, mu2: np.ndarray, sigma2: np.ndarray, shape):
    """Draw from the equal-weight two-component Gaussian mixture.

    mu2/sigma2 are (2, S) component parameters; shape is (..., S).
    """
    comp = rng.uniform(0.0, 1.0, size=shape) < 0.5
    z = rng.standard_normal(shape)
    mu_sel = np.where(comp, mu2[0], mu2[1])
    sigma_sel = np.where(comp, sigma2[0], sigma2[1])
    return mu_sel + sigma_sel * z


def generate_synthetic(
    n_clusters: int = 5,
    samples_per_cluster: int = 10_000,
    W: int = 10,
    T: int = 20,
    S: int = 3,
    seed: int = 0,
    mu_range=(20.0, 30.0),
    sigma_range=(0.0, 5.0),
    sigma_ranges=None,
    with_next: bool = False,
    per_variable: bool = True,
) -> tuple[SeriesDataset, np.ndarray]:
    """Benchmark generator: every sample's values come from one cluster.

    Each cluster draws two component means uniform from mu_range and two
    component deviations from sigma_range (or from the per-cluster
    ranges in sigma_ranges, used by separability fixtures), independently
    for each of the S variables; per_variable=False shares one draw
    across variables instead. Each scalar observation then comes from the
    equal-weight two-component Gaussian mixture. Defaults give 50,000
    samples of 10 windows x 20 points x 3 variables.

    The generating cluster id is attached to each sample as its label
    (classes = 0..n_clusters-1) and also returned as an array.
    """
    if min(n_clusters, samples_per_cluster, W, T, S) < 1:
        raise DataError("all size parameters must be positive")
    rng = Rng(seed)
    mu, sigma = _cluster_params(
        rng, n_clusters, S, mu_range, sigma_range, sigma_ranges, per_variable
    )
    n_w = W + 1 if with_next else W
    samples = []
    for i in range(n_clusters):
        values = _mixture_values(
            rng, mu[i], sigma[i], (samples_per_cluster, n_w, T, S)
        )
        for j in range(samples_per_cluster):
            samples.append(
                Sample(
                    id=f"syn-{i}-{j}",
                    windows=values[j, :W],
                    label=i,
                    next_window=values[j, W] if with_next else None,
                )
            )
    meta = DatasetMeta(
        W=W, T=T, S=S, classes=tuple(range(n_clusters)), k_hint=n_clusters
    )
    truth = np.repeat(np.arange(n_clusters), samples_per_cluster)
    return SeriesDataset(samples, meta), truth


def generate_mixed_synthetic(
    n_samples: int,
    n_clusters: int = 5,
    W: int = 9,
    T: int = 20,
    S: int = 3,
    seed: int = 0,
    mu_range=(20.0, 30.0),
    sigma_range=(0.0, 5.0),
    sigma_ranges=None,
    with_next: bool = False,
    per_variable: bool = True,
) -> tuple[SeriesDataset, np.ndarray]:
    """Fixture generator: each window drawn from its own random cluster.

    The sample label is the majority cluster over its W windows (ties
    broken toward the lowest cluster id). Returns the dataset and the
    (n_samples, W) array of true per-window cluster ids.
    """
    if min(n_samples, n_clusters, W, T, S) < 1:
        raise DataError("all size parameters must be positive")
    rng = Rng(seed)
    mu, sigma = _cluster_params(
        rng, n_clusters, S, mu_range, sigma_range, sigma_ranges, per_variable
    )
    n_w = W + 1 if with_next else W
    u = rng.uniform(0.0, 1.0, size=(n_samples, n_w))
    wc = np.minimum((u * n_clusters).astype(np.int64), n_clusters - 1)
    comp = rng.uniform(0.0, 1.0, size=(n_samples, n_w, T, S)) < 0.5
    z = rng.standard_normal((n_samples, n_w, T, S))
    mu_sel = np.where(comp, mu[wc, 0][:, :, None, :], mu[wc, 1][:, :, None, :])
    sg_sel = np.where(comp, sigma[wc, 0][:, :, None, :], sigma[wc, 1][:, :, None, :])
    values = mu_sel + sg_sel * z

    counts = np.zeros((n_samples, n_clusters), dtype=np.int64)
    rows = np.broadcast_to(np.arange(n_samples)[:, None], (n_samples, W))
    np.add.at(counts, (rows, wc[:, :W]), 1)
    labels = counts.argmax(axis=1)

    samples = [
        Sample(
            id=f"mix-{j}",
            windows=values[j, :W],
            label=int(labels[j]),
            next_window=values[j, W] if with_next else None,
        )
        for j in range(n_samples)
    ]
    meta = DatasetMeta(
        W=W, T=T, S=S, classes=tuple(range(n_clusters)), k_hint=n_clusters
    )
    return SeriesDataset(samples, meta), wc[:, :W]


def save_dataset(ds: SeriesDataset, path: str):
    """Write JSON Lines: a meta header line, then one sample per line.

    The write is atomic (temp file in the same directory, then rename).
    """
    meta = {
        "W": ds.meta.W,
        "T": ds.meta.T,
        "S": ds.meta.S,
        "classes": list(ds.meta.classes),
    }
    if ds.meta.k_hint is not None:
        meta["k_hint"] = ds.meta.k_hint
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(json.dumps({"meta": meta}, separators=(",", ":")) + "\n")
        for s in ds.samples:
            rec = {
                "id": s.id,
                "windows": s.windows.tolist(),
                "label": s.label,
                "next": None if s.next_window is None else s.next_window.tolist(),
            }
            f.write(json.dumps(rec, separators=(",", ":")) + "\n")
    os.replace(tmp, path)


def load_dataset(path: str) -> SeriesDataset:
    if not os.path.exists(path):
        raise DataError(f"dataset file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        lines = [ln for ln in (raw.strip() for raw in f) if ln]
    if not lines:
        raise DataError(f"empty dataset file: {path}")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise DataError(f"line 1: malformed JSON header ({e.msg})") from None
    if "meta" not in header:
        raise DataError("line 1: missing meta header")
    m = header["meta"]
    try:
        meta = DatasetMeta(
            W=int(m["W"]),
            T=int(m["T"]),
            S=int(m["S"]),
            classes=tuple(int(c) for c in m.get("classes", [])),
            k_hint=None if m.get("k_hint") is None else int(m["k_hint"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"line 1: bad meta header ({e})") from None
    if len(lines) < 2:
        raise DataError(f"dataset file has a header but no samples: {path}")

    samples = []
    for i, line in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise DataError(f"line {i}: malformed JSON ({e.msg})") from None
        sid = str(rec.get("id", f"<line {i}>"))
        try:
            windows = np.asarray(rec["windows"], dtype=np.float64)
        except (KeyError, ValueError) as e:
            raise DataError(f"sample {sid!r} (line {i}): bad windows ({e})") from None
        if windows.shape != (meta.W, meta.T, meta.S):
            raise DataError(
                f"sample {sid!r} (line {i}): windows shape {windows.shape}, "
                f"expected {(meta.W, meta.T, meta.S)}"
            )
        label = rec.get("label")
        nxt = rec.get("next")
        if nxt is not None:
            nxt = np.asarray(nxt, dtype=np.float64)
            if nxt.shape != (meta.T, meta.S):
                raise DataError(
                    f"sample {sid!r} (line {i}): next window shape {nxt.shape}, "
                    f"expected {(meta.T, meta.S)}"
                )
        samples.append(
            Sample(
                id=sid,
                windows=windows,
                label=None if label is None else int(label),
                next_window=nxt,
            )
        )
    return SeriesDataset(samples, meta)


def split_dataset(
    ds: SeriesDataset,
    train_frac: float = 0.8,
    val_frac_of_train: float = 0.1,
    seed: int = 0,
    by_time: bool = False,
) -> tuple[SeriesDataset, SeriesDataset, SeriesDataset]:
    """Disjoint, exhaustive train/val/test split.

    Validation is carved from the train portion. With by_time the file
    order is treated as the timeline (test takes the most recent tail);
    otherwise a seeded permutation decides membership.
    """
    if not (0.0 < train_frac < 1.0 and 0.0 < val_frac_of_train < 1.0):
        raise DataError("split fractions must lie in (0, 1)")
    n = len(ds)
    n_train_total = int(n * train_frac)
    n_val = int(n_train_total * val_frac_of_train)
    n_train = n_train_total - n_val
    n_test = n - n_train_total
    if min(n_train, n_val, n_test) < 1:
        raise DataError(
            f"dataset of {n} samples is too small for a "
            f"{train_frac}/{val_frac_of_train} split"
        )
    if by_time:
        order = np.arange(n)
    else:
        order = Rng.derive(seed, 1).permutation(n)
    return (
        ds.subset(order[:n_train]),
        ds.subset(order[n_train:n_train_total]),
        ds.subset(order[n_train_total:]),
    )


def batches(ds_or_n, batch_size: int, seed: int, epoch: int) -> list[np.ndarray]:
    """Seeded index batches; the permutation depends on (seed, epoch).

    Accepts a dataset or a plain count (used when batching windows
    rather than samples). The final batch may be short.
    """
    if batch_size < 1:
        raise DataError(f"batch_size must be >= 1, got {batch_size}")
    n = ds_or_n if isinstance(ds_or_n, int) else len(ds_or_n)
    perm = Rng.derive(seed, 0, epoch).permutation(n)
    return [perm[i:i + batch_size] for i in range(0, n, batch_size)]
