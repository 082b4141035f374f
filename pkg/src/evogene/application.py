"""Recurrent fusion of gene signals and the downstream prediction heads.

Each window contributes its standardized values, its assignment row and
its latent code to one recurrent update; the final state feeds a dense
head that either forecasts the next window (relu, raw scale) or scores
event classes (softmax). End-to-end training keeps the pretrained
assignment fixed and fine-tunes the classifier and gene networks at a
much smaller rate than the fresh fusion/head parameters.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .data import SeriesDataset, batches
from .errors import DataError, DimensionError, NumericError
from .evaluation import mape
from .generation import (
    GeneModel,
    d_loss,
    disc_forward,
    enc_forward,
    encode,
    g_fm_loss,
    gen_forward,
    kl_loss,
)
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
from .recognition import (
    ClassifierC,
    GeneAssignment,
    classifier_apply,
    classifier_forward,
)


@dataclass
class FusionState:
    H: np.ndarray
    step: int = 0


@dataclass
class PredictorModel:
    params: ParamStore
    task: str
    classifier: ClassifierC
    genes: GeneModel
    n_out: int
    d_H: int = 128

    @property
    def in_dim(self) -> int:
        return self.genes.flat_dim + self.genes.K + self.genes.d_h


def new_predictor(
    ds: SeriesDataset,
    classifier: ClassifierC,
    genes: GeneModel,
    task: str,
    seed: int,
    d_H: int = 128,
    head_width: int = 64,
) -> PredictorModel:
    if task not in ("value", "event"):
        raise DataError(f"task must be 'value' or 'event', got {task!r}")
    m = ds.meta
    if task == "event":
        if not m.classes:
            raise DataError("event task needs event classes in the meta")
        n_out = len(m.classes)
    else:
        n_out = m.T * m.S

    in_dim = m.T * m.S + genes.K + genes.d_h
    store = ParamStore(seed, key=(6,))
    store.matrix("f_w", in_dim, d_H)
    store.matrix("f_u", d_H, d_H)
    store.bias("f_b", (1, d_H))
    store.matrix("p_w1", d_H, head_width)
    store.bias("p_b1", (1, head_width))
    store.matrix("p_w2", head_width, n_out)
    p_b2 = store.bias("p_b2", (1, n_out))
    if task == "value":
        # start the forecast at the data center, as the generator does
        mean, _ = genes.flat_stats()
        p_b2.data[:] = mean
    return PredictorModel(
        params=store, task=task, classifier=classifier, genes=genes,
        n_out=n_out, d_H=d_H,
    )


# ----------------------------------------------------------------- fusion

def fuse_graph(model: PredictorModel, x_steps, a_steps, h_steps) -> list[Tensor]:
    """Recurrent states H_1..H_W as graph nodes.

    x_steps/a_steps/h_steps are length-W lists of (B, F), (B, K) and
    (B, d_h) inputs (arrays or Tensors); H_0 = 0.
    """
    if not (len(x_steps) == len(a_steps) == len(h_steps)):
        raise DimensionError("per-window input lists differ in length")
    p = model.params
    batch = np.asarray(
        x_steps[0].data if isinstance(x_steps[0], Tensor) else x_steps[0]
    ).shape[0]
    H = Tensor(np.zeros((batch, model.d_H)))
    states = []
    for x, a, h in zip(x_steps, a_steps, h_steps):
        x = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))
        a = a if isinstance(a, Tensor) else Tensor(np.asarray(a, dtype=np.float64))
        h = h if isinstance(h, Tensor) else Tensor(np.asarray(h, dtype=np.float64))
        joint = T.concat([x, a, h], axis=1)
        H = rnn_cell(joint, H, p["f_w"], p["f_u"], p["f_b"])
        states.append(H)
    return states


def fuse_sequence(model: PredictorModel, windows, probs, latents, return_states=False):
    """Final fusion state H_W for one sample or a batch, without grads.

    windows is (W, T, S) or (B, W, T, S); probs and latents supply the
    per-window assignment rows and latent codes with matching leading
    dimensions.
    """
    w = np.asarray(windows, dtype=np.float64)
    a = np.asarray(probs, dtype=np.float64)
    h = np.asarray(latents, dtype=np.float64)
    single = w.ndim == 3
    if single:
        w, a, h = w[None], a[None], h[None]
    B, W = w.shape[0], w.shape[1]
    if a.shape[:2] != (B, W) or h.shape[:2] != (B, W):
        raise DimensionError(
            f"windows {w.shape[:2]} vs probs {a.shape[:2]} vs latents {h.shape[:2]}"
        )
    mean, std = model.genes.flat_stats()
    flat = (w.reshape(B, W, -1) - mean[None]) / std[None]
    with no_grad():
        states = fuse_graph(
            model,
            [flat[:, n] for n in range(W)],
            [a[:, n] for n in range(W)],
            [h[:, n] for n in range(W)],
        )
    if return_states:
        out = [
            FusionState(H=s.data[0] if single else s.data, step=n + 1)
            for n, s in enumerate(states)
        ]
        return out
    final = states[-1].data
    return final[0] if single else final


def head_graph(model: PredictorModel, H) -> Tensor:
    """Head output from a fusion state: relu values or class probabilities."""
    p = model.params
    h1 = T.tanh(affine(H, p["p_w1"], p["p_b1"]))
    out = affine(h1, p["p_w2"], p["p_b2"])
    if model.task == "value":
        return T.relu(out)
    return T.softmax_rows(out)


# -------------------------------------------------------------- inference

def _inference_inputs(model: PredictorModel, w: np.ndarray):
    """Assignment rows and mean latent codes for (B, W, T, S) windows."""
    B, W = w.shape[0], w.shape[1]
    segs = w.reshape(B * W, w.shape[2], w.shape[3])
    probs = classifier_apply(model.classifier, segs)
    hard = probs.argmax(axis=1)
    cond = np.zeros((B * W, model.genes.K))
    cond[np.arange(B * W), hard] = 1.0
    mu, _ = encode(model.genes, segs, cond)
    return probs.reshape(B, W, -1), mu.reshape(B, W, -1)


def predict_batch(model: PredictorModel, windows) -> np.ndarray:
    """Head outputs for (B, W, T, S) windows using encoder means."""
    w = np.asarray(windows, dtype=np.float64)
    if w.ndim != 4:
        raise DimensionError(f"windows must be (B, W, T, S), got {w.shape}")
    probs, mu = _inference_inputs(model, w)
    mean, std = model.genes.flat_stats()
    flat = (w.reshape(w.shape[0], w.shape[1], -1) - mean[None]) / std[None]
    with no_grad():
        states = fuse_graph(
            model,
            [flat[:, n] for n in range(w.shape[1])],
            [probs[:, n] for n in range(w.shape[1])],
            [mu[:, n] for n in range(w.shape[1])],
        )
        out = head_graph(model, states[-1]).data
    return out


def predict_value(model: PredictorModel, windows) -> np.ndarray:
    """Forecast the next window of one sample as a (T, S) array."""
    if model.task != "value":
        raise DataError(f"model solves task {model.task!r}, not value")
    w = np.asarray(windows, dtype=np.float64)
    if w.ndim != 3:
        raise DimensionError(f"sample windows must be (W, T, S), got {w.shape}")
    out = predict_batch(model, w[None])[0]
    return out.reshape(model.genes.T, model.genes.S)


def predict_event(model: PredictorModel, windows) -> np.ndarray:
    """Class probabilities for one sample."""
    if model.task != "event":
        raise DataError(f"model solves task {model.task!r}, not event")
    w = np.asarray(windows, dtype=np.float64)
    if w.ndim != 3:
        raise DimensionError(f"sample windows must be (W, T, S), got {w.shape}")
    return predict_batch(model, w[None])[0]


# ------------------------------------------------------------------ losses

def total_loss(app_loss, d_loss_v, g_fm_v, kl_v, c_loss, lam1=1.0, lam2=1.0):
    """L = L_app + lam1 * (L_D + L_GD + L_KL) + lam2 * L_C.

    Works on floats or graph Tensors; float inputs must be finite.
    """
    parts = (app_loss, d_loss_v, g_fm_v, kl_v, c_loss)
    live = any(isinstance(x, Tensor) for x in parts)
    if not live:
        vals = [float(x) for x in parts]
        if not all(np.isfinite(v) for v in vals):
            raise NumericError(f"non-finite loss components: {vals}")
        app, d, fm, kl, c = vals
        return app + lam1 * (d + fm + kl) + lam2 * c
    app, d, fm, kl, c = [
        x if isinstance(x, Tensor) else Tensor(np.asarray(float(x)))
        for x in parts
    ]
    gene_terms = T.add(T.add(d, fm), kl)
    return T.add(T.add(app, T.scale(gene_terms, lam1)), T.scale(c, lam2))


# ---------------------------------------------------------------- training

def _carve_validation(n: int, seed: int, frac: float = 0.1):
    if frac <= 0.0:
        return np.arange(n), np.empty(0, dtype=np.int64)
    order = Rng.derive(seed, 8).permutation(n)
    n_val = max(1, int(n * frac))
    if n_val >= n:
        raise DataError(f"{n} samples are too few to carve a validation split")
    return np.sort(order[n_val:]), np.sort(order[:n_val])


def _snapshot(stores: dict) -> dict:
    return {
        name: {k: v.copy() for k, v in store.state_arrays().items()}
        for name, store in stores.items()
    }


def _restore(stores: dict, snap: dict) -> None:
    for name, store in stores.items():
        store.load_arrays(snap[name])


def train_end_to_end(
    ds: SeriesDataset,
    classifier: ClassifierC,
    genes: GeneModel,
    task: str,
    seed: int,
    assignment: GeneAssignment | None = None,
    epochs: int = 100,
    lr: float = 0.01,
    lr_decay_every: int = 20,
    lr_decay_factor: float = 10.0,
    fine_tune_lr: float = 1e-4,
    batch_size: int = 50,
    lam1: float = 1.0,
    lam2: float = 1.0,
    val_frac: float = 0.1,
    d_H: int = 128,
) -> tuple[PredictorModel, list[dict]]:
    """Train fusion and head on top of the pretrained recognition stack.

    The assignment stays fixed throughout (recomputed from the classifier
    when not supplied). Fusion/head parameters start at lr and decay by
    lr_decay_factor every lr_decay_every epochs; classifier, encoder,
    generator and discriminator move at fine_tune_lr (0 freezes them).
    Gene networks keep their adversarial phase structure, scaled by lam1;
    lam1=0 skips gene updates entirely and lam2=0 drops the classifier
    term. Returns the model restored to its best validation epoch and a
    per-epoch trace of train loss components, validation metric and lr.
    val_frac=0 skips the carve (val traces as nan) and keeps the
    final-epoch parameters.
    """
    w_all = ds.stacked()
    n, W = w_all.shape[0], ds.meta.W
    model = new_predictor(ds, classifier, genes, task, seed, d_H=d_H)

    if task == "value":
        targets = ds.next_windows()
        if targets is None:
            raise DataError("value task needs next windows in the dataset")
        targets = targets.reshape(n, -1)
    else:
        targets = ds.labels()
        if targets is None:
            raise DataError("event task needs labels in the dataset")
        if int(targets.max()) >= model.n_out:
            raise DataError("labels exceed the declared event classes")

    if assignment is None:
        probs_flat = classifier_apply(model.classifier, ds.segments())
        assignment = GeneAssignment(probs_flat.reshape(n, W, -1))
    if assignment.probs.shape[:2] != (n, W):
        raise DataError("assignment does not cover the dataset")

    trace: list[dict] = []
    if epochs == 0:
        return model, trace

    fit_idx, val_idx = _carve_validation(n, seed, val_frac)
    mean, std = genes.flat_stats()
    x_flat_all = w_all.reshape(n, W, -1)
    x_std_all = (x_flat_all - mean[None]) / std[None]
    probs_all = assignment.probs
    hard_all = assignment.hard

    stores = {
        "predictor": model.params,
        "classifier": classifier.params,
        "enc": genes.enc,
        "gen": genes.gen,
        "disc": genes.disc,
    }
    best = {"metric": None, "snap": _snapshot(stores)}
    rng_z = Rng.derive(seed, 7)
    val_w = w_all[val_idx]

    def _better(metric, current):
        if current is None:
            return True
        return metric < current if task == "value" else metric > current

    for e in range(epochs):
        lr_now = lr / (lr_decay_factor ** (e // lr_decay_every))
        sums = {"app": 0.0, "d": 0.0, "fm": 0.0, "kl": 0.0, "c": 0.0}
        seen = 0
        for b_i, idx in enumerate(batches(len(fit_idx), batch_size, seed, e)):
            rows = fit_idx[idx]
            B = len(rows)
            try:
                sums_b = _train_batch(
                    model, rows, B, W, x_flat_all, x_std_all, probs_all,
                    hard_all, targets, rng_z, lr_now,
                    fine_tune_lr, lam1, lam2,
                )
            except NumericError as err:
                raise NumericError(f"epoch {e}, batch {b_i}: {err}") from err
            for k, v in sums_b.items():
                sums[k] += v * B
            seen += B

        epoch_means = {k: v / max(seen, 1) for k, v in sums.items()}
        epoch_means["total"] = total_loss(
            epoch_means["app"], epoch_means["d"], epoch_means["fm"],
            epoch_means["kl"], epoch_means["c"], lam1, lam2,
        )
        if len(val_idx):
            val_metric = _validation_metric(model, val_w, targets[val_idx], task)
            if _better(val_metric, best["metric"]):
                best["metric"] = val_metric
                best["snap"] = _snapshot(stores)
            epoch_means["val"] = val_metric
        else:
            epoch_means["val"] = float("nan")
        epoch_means["lr"] = lr_now
        trace.append(epoch_means)

    if best["metric"] is not None:
        _restore(stores, best["snap"])
    return model, trace


def _train_batch(
    model, rows, B, W, x_flat_all, x_std_all, probs_all, hard_all,
    targets, rng_z, lr_now, fine_tune_lr, lam1, lam2,
):
    genes, classifier = model.genes, model.classifier
    x_flat = x_flat_all[rows].reshape(B * W, -1)
    x_std = x_std_all[rows].reshape(B * W, -1)
    hard = hard_all[rows].ravel()
    # gene updates condition the way pretraining did: on assignment rows
    cond = probs_all[rows].reshape(B * W, -1)
    # fusion latents condition on the argmax gene, same as inference
    cond_hard = np.zeros((B * W, model.genes.K))
    cond_hard[np.arange(B * W), hard] = 1.0
    sums = {"app": 0.0, "d": 0.0, "fm": 0.0, "kl": 0.0, "c": 0.0}

    if lam1 > 0.0:
        d_sum = kl_sum = fm_sum = 0.0
        for k in np.unique(hard):
            sel = hard == k
            cond_k = Tensor(cond[sel])
            x_std_k = Tensor(x_std[sel])
            x_raw_k = Tensor(x_flat[sel])
            n_k = int(sel.sum())

            with no_grad():
                mu0, ls0 = enc_forward(genes, x_std_k, cond_k)
                z0 = rng_z.standard_normal(mu0.data.shape)
                fake0 = gen_forward(
                    genes, Tensor(mu0.data + z0 * np.exp(ls0.data)), cond_k
                ).data
            p_real, _ = disc_forward(genes, x_raw_k)
            p_fake, _ = disc_forward(genes, Tensor(fake0))
            ld_t = d_loss(p_real, p_fake)
            T.scale(ld_t, lam1).backward()
            sgd_step(genes.disc, fine_tune_lr)

            mu_t, ls_t = enc_forward(genes, x_std_k, cond_k)
            z = rng_z.standard_normal(mu_t.data.shape)
            h_t = T.add(mu_t, T.mul(Tensor(z), T.exp(ls_t)))
            fake_t = gen_forward(genes, h_t, cond_k)
            kl_t = kl_loss(mu_t, ls_t)
            with no_grad():
                _, f_real = disc_forward(genes, x_raw_k)
            _, f_fake = disc_forward(genes, fake_t)
            fm_t = g_fm_loss(Tensor(f_real.data), f_fake)
            T.scale(T.add(kl_t, fm_t), lam1).backward()
            sgd_step(genes.enc, fine_tune_lr)
            sgd_step(genes.gen, fine_tune_lr)

            d_sum += float(ld_t.data) * n_k
            kl_sum += float(kl_t.data) * n_k
            fm_sum += float(fm_t.data) * n_k
        sums["d"] = d_sum / (B * W)
        sums["kl"] = kl_sum / (B * W)
        sums["fm"] = fm_sum / (B * W)

    # predictor phase: app loss through sampled latents, plus the
    # classifier's cross-entropy against the fixed assignment
    x_steps, a_steps, h_steps = [], [], []
    for n_step in range(W):
        step_rows = np.arange(B) * W + n_step
        x_std_n = Tensor(x_std[step_rows])
        cond_n = Tensor(cond_hard[step_rows])
        mu_n, ls_n = enc_forward(genes, x_std_n, cond_n)
        if fine_tune_lr > 0.0:
            # reparameterized draw so the encoder sees app-loss gradient
            z = rng_z.standard_normal(mu_n.data.shape)
            h_n = T.add(mu_n, T.mul(Tensor(z), T.exp(ls_n)))
        else:
            # frozen encoder: no gradient needs the draw, use the mean so
            # training matches the deterministic inference path
            h_n = mu_n
        x_steps.append(x_std_n)
        a_steps.append(Tensor(probs_all[rows][:, n_step]))
        h_steps.append(h_n)
    H_final = fuse_graph(model, x_steps, a_steps, h_steps)[-1]
    out = head_graph(model, H_final)
    if model.task == "value":
        # squared L2 per sample, averaged over the batch; the per-element
        # mean would scale gradients down by T*S and stall the head under
        # the fixed lr schedule
        diff = T.sub(out, Tensor(targets[rows]))
        app_t = T.scale(T.tsum(T.square(diff)), 1.0 / B)
    else:
        app_t = loss_cross_entropy(out, targets[rows])

    if lam2 > 0.0:
        c_probs = classifier_forward(classifier, x_flat_all[rows].reshape(
            B * W, genes.T, genes.S
        ))
        c_t = loss_cross_entropy(c_probs, hard)
        joint = T.add(app_t, T.scale(c_t, lam2))
        sums["c"] = float(c_t.data)
    else:
        joint = app_t
    joint.backward()
    sgd_step(model.params, lr_now)
    if fine_tune_lr > 0.0:
        sgd_step(genes.enc, fine_tune_lr)
        if lam2 > 0.0:
            sgd_step(classifier.params, fine_tune_lr)
    else:
        genes.enc.zero_grads()
        if lam2 > 0.0:
            classifier.params.zero_grads()
    sums["app"] = float(app_t.data)
    return sums


def _validation_metric(model, val_w, val_targets, task) -> float:
    out = predict_batch(model, val_w)
    if task == "value":
        value, _ = mape(val_targets, out)
        return value
    return float(np.mean(out.argmax(axis=1) == val_targets))


# ----------------------------------------------------------------- export

def save_predictions(path: str, ids, values=None, probs=None) -> None:
    """JSON Lines: one {"id", "pred_value", "pred_class", "probs"} per id."""
    n = len(ids)
    if values is not None and len(values) != n:
        raise DimensionError(f"{len(values)} values for {n} ids")
    if probs is not None and len(probs) != n:
        raise DimensionError(f"{len(probs)} probability rows for {n} ids")
    fd, tmp = tempfile.mkstemp(
        dir=os.path.dirname(os.path.abspath(path)) or ".", suffix=".tmp"
    )
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            for i, sid in enumerate(ids):
                row = {
                    "id": str(sid),
                    "pred_value": (
                        np.asarray(values[i]).tolist() if values is not None else None
                    ),
                    "pred_class": (
                        int(np.argmax(probs[i])) if probs is not None else None
                    ),
                    "probs": (
                        np.asarray(probs[i]).tolist() if probs is not None else None
                    ),
                }
                f.write(json.dumps(row) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
