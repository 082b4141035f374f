"""Per-gene generative model: encoder, latent sampling, generator, critic.

Segments are flattened to T*S vectors. The encoder and discriminator see
standardized values (per-variable mean/std buffers learned from the
training data); the generator emits raw-scale segments, with its output
bias initialized at the per-variable data mean so an untrained model
starts at the data's center. A single encoder/generator pair is shared
across genes and conditioned on the assignment vector; the discriminator
is unconditioned.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import SeriesDataset, batches
from .errors import DataError, DimensionError
from .numcore import ParamStore, Rng, Tensor, affine, loss_mse, no_grad, sgd_step
from .numcore import tensor as T
from .recognition import GeneAssignment, input_stats

_EPS = 1e-12


@dataclass
class LatentCode:
    """Variational code for one segment: h = mu + z * exp(log_scale)."""

    mu: np.ndarray
    log_scale: np.ndarray
    z: np.ndarray

    @property
    def h(self) -> np.ndarray:
        return self.mu + self.z * np.exp(self.log_scale)


@dataclass
class GeneModel:
    enc: ParamStore
    gen: ParamStore
    disc: ParamStore
    K: int
    T: int
    S: int
    d_h: int = 32
    width: int = 64

    @property
    def flat_dim(self) -> int:
        return self.T * self.S

    def flat_stats(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-variable stats tiled across time steps, shape (1, T*S)."""
        mean = np.tile(self.enc["in_mean"].data.ravel(), self.T)
        std = np.tile(self.enc["in_std"].data.ravel(), self.T)
        return mean[None, :], std[None, :]


def new_gene_model(
    ds: SeriesDataset, K: int, seed: int, d_h: int = 32, width: int = 64
) -> GeneModel:
    m = ds.meta
    F = m.T * m.S
    mean, std = input_stats(ds)

    enc = ParamStore(seed, key=(4, 0))
    enc.buffer("in_mean", mean.reshape(1, m.S))
    enc.buffer("in_std", std.reshape(1, m.S))
    enc.matrix("e_w1", F + K, width)
    enc.bias("e_b1", (1, width))
    enc.matrix("e_w2", width, width)
    enc.bias("e_b2", (1, width))
    enc.matrix("e_mu_w", width, d_h)
    enc.bias("e_mu_b", (1, d_h))
    enc.matrix("e_ls_w", width, d_h)
    enc.bias("e_ls_b", (1, d_h))

    gen = ParamStore(seed, key=(4, 1))
    gen.matrix("g_w1", d_h + K, width)
    gen.bias("g_b1", (1, width))
    gen.matrix("g_w2", width, width)
    gen.bias("g_b2", (1, width))
    gen.matrix("g_out_w", width, F)
    g_out_b = gen.bias("g_out_b", (1, F))
    g_out_b.data[:] = (np.tile(mean, m.T) / np.tile(std, m.T))[None, :]

    disc = ParamStore(seed, key=(4, 2))
    disc.matrix("d_w1", F, width)
    disc.bias("d_b1", (1, width))
    disc.matrix("d_w2", width, width)
    disc.bias("d_b2", (1, width))
    disc.matrix("d_out_w", width, 1)
    disc.bias("d_out_b", (1, 1))

    return GeneModel(enc=enc, gen=gen, disc=disc, K=K, T=m.T, S=m.S,
                     d_h=d_h, width=width)


# ------------------------------------------------------- tensor-graph paths

def enc_forward(model: GeneModel, x_std_flat, cond) -> tuple[Tensor, Tensor]:
    """Posterior parameters (mu, log_scale) from standardized flat input."""
    p = model.enc
    joint = T.concat([x_std_flat, cond], axis=1)
    h1 = T.tanh(affine(joint, p["e_w1"], p["e_b1"]))
    h2 = T.tanh(affine(h1, p["e_w2"], p["e_b2"]))
    return affine(h2, p["e_mu_w"], p["e_mu_b"]), affine(h2, p["e_ls_w"], p["e_ls_b"])


def gen_forward(model: GeneModel, h, cond) -> Tensor:
    """Raw-scale flat segment (B, T*S) from latent h and condition.

    The network operates in standardized units and the result is scaled
    by the per-variable std, so the weights stay O(1) regardless of the
    data magnitude; the output bias starts at mean/std, which makes the
    initial decode sit at the data mean.
    """
    p = model.gen
    joint = T.concat([h, cond], axis=1)
    h1 = T.tanh(affine(joint, p["g_w1"], p["g_b1"]))
    h2 = T.tanh(affine(h1, p["g_w2"], p["g_b2"]))
    core = affine(h2, p["g_out_w"], p["g_out_b"])
    _, std = model.flat_stats()
    return T.mul(core, Tensor(std))


def disc_forward(model: GeneModel, x_raw_flat) -> tuple[Tensor, Tensor]:
    """(p_real (B, 1), penultimate features (B, width)) from raw input."""
    p = model.disc
    mean, std = model.flat_stats()
    x = T.mul(T.sub(x_raw_flat, Tensor(mean)), Tensor(1.0 / std))
    h1 = T.tanh(affine(x, p["d_w1"], p["d_b1"]))
    feats = T.tanh(affine(h1, p["d_w2"], p["d_b2"]))
    logit = affine(feats, p["d_out_w"], p["d_out_b"])
    return T.sigmoid(logit), feats


def _standardize_flat(model: GeneModel, x_flat: np.ndarray) -> np.ndarray:
    mean, std = model.flat_stats()
    return (x_flat - mean) / std


def _check_cond(cond: np.ndarray, K: int):
    if cond.shape[-1] != K:
        raise DimensionError(f"condition width {cond.shape[-1]}, expected {K}")
    if not np.allclose(cond.sum(axis=-1), 1.0, atol=1e-6):
        raise DimensionError("condition rows must sum to 1")


# ------------------------------------------------------------ ndarrayedges

def encode(model: GeneModel, segment, assignment) -> tuple[np.ndarray, np.ndarray]:
    """Posterior (mu, log_scale); accepts one (T, S) segment or a batch."""
    seg = np.asarray(segment, dtype=np.float64)
    cond = np.asarray(assignment, dtype=np.float64)
    single = seg.ndim == 2
    if single:
        seg, cond = seg[None], cond[None]
    if seg.shape[1:] != (model.T, model.S):
        raise DimensionError(
            f"segment shape {seg.shape[1:]}, expected {(model.T, model.S)}"
        )
    _check_cond(cond, model.K)
    flat = _standardize_flat(model, seg.reshape(seg.shape[0], -1))
    with no_grad():
        mu, ls = enc_forward(model, Tensor(flat), Tensor(cond))
    if single:
        return mu.data[0], ls.data[0]
    return mu.data, ls.data


def sample_latent(mu, log_scale, rng: Rng) -> np.ndarray:
    """h = mu + z * exp(log_scale) with z standard normal from rng."""
    mu = np.asarray(mu, dtype=np.float64)
    ls = np.asarray(log_scale, dtype=np.float64)
    if mu.shape != ls.shape:
        raise DimensionError(f"shape mismatch: {mu.shape} vs {ls.shape}")
    z = rng.standard_normal(mu.shape)
    return mu + z * np.exp(ls)


def kl_loss(mu, log_scale):
    """0.5 * (sum mu^2 + sum(exp(d) - d - 1)); batch rows are averaged.

    Returns a Tensor when either input is one, otherwise a float.
    """
    live = isinstance(mu, Tensor) or isinstance(log_scale, Tensor)
    mu_t = mu if isinstance(mu, Tensor) else Tensor(np.asarray(mu, dtype=np.float64))
    ls_t = (log_scale if isinstance(log_scale, Tensor)
            else Tensor(np.asarray(log_scale, dtype=np.float64)))
    if mu_t.data.shape != ls_t.data.shape:
        raise DimensionError(
            f"shape mismatch: {mu_t.data.shape} vs {ls_t.data.shape}"
        )
    spread = T.sub(T.exp(ls_t), T.add(ls_t, 1.0))
    total = T.scale(T.add(T.tsum(T.square(mu_t)), T.tsum(spread)), 0.5)
    if mu_t.data.ndim == 2:
        total = T.scale(total, 1.0 / mu_t.data.shape[0])
    if live:
        return total
    return float(total.data)


def generate(model: GeneModel, h, assignment) -> np.ndarray:
    """Decode latent h under a condition; (T, S) in, (T, S) out (or batch)."""
    h = np.asarray(h, dtype=np.float64)
    cond = np.asarray(assignment, dtype=np.float64)
    single = h.ndim == 1
    if single:
        h, cond = h[None], cond[None]
    if h.shape[1] != model.d_h:
        raise DimensionError(f"latent width {h.shape[1]}, expected {model.d_h}")
    _check_cond(cond, model.K)
    with no_grad():
        flat = gen_forward(model, Tensor(h), Tensor(cond)).data
    out = flat.reshape(-1, model.T, model.S)
    return out[0] if single else out


def discriminate(model: GeneModel, segment) -> tuple:
    """(p_real, features); scalar/vector for one segment, arrays for batch."""
    seg = np.asarray(segment, dtype=np.float64)
    single = seg.ndim == 2
    if single:
        seg = seg[None]
    if seg.shape[1:] != (model.T, model.S):
        raise DimensionError(
            f"segment shape {seg.shape[1:]}, expected {(model.T, model.S)}"
        )
    with no_grad():
        p, feats = disc_forward(model, Tensor(seg.reshape(seg.shape[0], -1)))
    if single:
        return float(p.data[0, 0]), feats.data[0]
    return p.data[:, 0], feats.data


def d_loss(p_real, p_fake):
    """-mean log p_real - mean log(1 - p_fake), probabilities clamped.

    Returns a Tensor when either input is one, otherwise a float.
    """
    live = isinstance(p_real, Tensor) or isinstance(p_fake, Tensor)
    pr = p_real if isinstance(p_real, Tensor) else Tensor(np.asarray(p_real, dtype=np.float64))
    pf = p_fake if isinstance(p_fake, Tensor) else Tensor(np.asarray(p_fake, dtype=np.float64))
    real_term = T.tmean(T.log(T.clamp_min(pr, _EPS)))
    fake_term = T.tmean(T.log(T.clamp_min(T.sub(1.0, pf), _EPS)))
    out = T.scale(T.add(real_term, fake_term), -1.0)
    if live:
        return out
    return float(out.data)


def g_fm_loss(real_features, fake_features):
    """Squared distance between batch-mean real and fake feature vectors.

    Returns a Tensor when either input is one, otherwise a float.
    """
    live = isinstance(real_features, Tensor) or isinstance(fake_features, Tensor)
    fr = (real_features if isinstance(real_features, Tensor)
          else Tensor(np.asarray(real_features, dtype=np.float64)))
    ff = (fake_features if isinstance(fake_features, Tensor)
          else Tensor(np.asarray(fake_features, dtype=np.float64)))
    if fr.data.shape[1] != ff.data.shape[1]:
        raise DimensionError(
            f"feature widths differ: {fr.data.shape[1]} vs {ff.data.shape[1]}"
        )
    diff = T.sub(T.tmean(fr, axis=0), T.tmean(ff, axis=0))
    out = T.tsum(T.square(diff))
    if live:
        return out
    return float(out.data)


# ----------------------------------------------------------------- training

def train_genes(
    ds: SeriesDataset,
    assignment: GeneAssignment,
    K: int,
    seed: int,
    epochs: int = 30,
    lr: float = 0.001,
    batch_size: int = 2000,
    adversarial: bool = True,
    d_h: int = 32,
    width: int = 64,
) -> tuple[GeneModel, list[dict]]:
    """Adversarial (or encoder-only) training of the shared gene model.

    Per batch, windows are grouped by hard gene. For each group the
    discriminator is stepped on real vs freshly generated segments, then
    the encoder and generator are stepped on KL plus feature matching.
    With adversarial=False the discriminator is skipped and the fit term
    is reconstruction error in standardized space (the encoder-only
    ablation). Returns the model and per-epoch mean loss components.
    """
    if assignment.hard.shape != (len(ds), ds.meta.W):
        raise DataError("assignment does not cover the dataset")
    if assignment.K != K:
        raise DataError(f"assignment has K={assignment.K}, expected {K}")

    model = new_gene_model(ds, K, seed, d_h=d_h, width=width)
    segments = ds.segments()
    M = segments.shape[0]
    x_flat = segments.reshape(M, -1)
    x_std = _standardize_flat(model, x_flat)
    hard = assignment.flat_hard()
    probs = assignment.flat_probs()

    for k in range(K):
        if not np.any(hard == k):
            warnings.warn(f"gene {k} has no windows and will not be trained")

    rng_z = Rng.derive(seed, 2)
    traces: list[dict] = []
    for e in range(epochs):
        sums = {"d_loss": 0.0, "kl": 0.0, "fit": 0.0}
        seen = 0
        for idx in batches(M, batch_size, seed, e):
            hb = hard[idx]
            for k in np.unique(hb):
                rows = idx[hb == k]
                cond = Tensor(probs[rows])
                x_std_c = Tensor(x_std[rows])
                x_raw_c = Tensor(x_flat[rows])
                n_rows = len(rows)

                ld = 0.0
                if adversarial:
                    with no_grad():
                        mu0, ls0 = enc_forward(model, x_std_c, cond)
                        z0 = rng_z.standard_normal(mu0.data.shape)
                        h0 = mu0.data + z0 * np.exp(ls0.data)
                        fake0 = gen_forward(model, Tensor(h0), cond).data
                    p_real, _ = disc_forward(model, x_raw_c)
                    p_fake, _ = disc_forward(model, Tensor(fake0))
                    ld_t = d_loss(p_real, p_fake)
                    ld_t.backward()
                    sgd_step(model.disc, lr)
                    ld = float(ld_t.data)

                mu_t, ls_t = enc_forward(model, x_std_c, cond)
                z = rng_z.standard_normal(mu_t.data.shape)
                h_t = T.add(mu_t, T.mul(Tensor(z), T.exp(ls_t)))
                fake_t = gen_forward(model, h_t, cond)
                kl_t = kl_loss(mu_t, ls_t)
                if adversarial:
                    with no_grad():
                        _, f_real = disc_forward(model, x_raw_c)
                    _, f_fake = disc_forward(model, fake_t)
                    fit_t = g_fm_loss(Tensor(f_real.data), f_fake)
                else:
                    mean, std = model.flat_stats()
                    fake_std = T.mul(T.sub(fake_t, Tensor(mean)), Tensor(1.0 / std))
                    fit_t = loss_mse(fake_std, x_std_c)
                loss = T.add(kl_t, fit_t)
                loss.backward()
                sgd_step(model.enc, lr)
                sgd_step(model.gen, lr)

                sums["d_loss"] += ld * n_rows
                sums["kl"] += float(kl_t.data) * n_rows
                sums["fit"] += float(fit_t.data) * n_rows
                seen += n_rows
        traces.append({k: v / max(seen, 1) for k, v in sums.items()})
    return model, traces


def sample_segments(model: GeneModel, gene: int, n: int, rng: Rng) -> np.ndarray:
    """Draw n segments for one gene from the prior h ~ N(0, I)."""
    if not 0 <= gene < model.K:
        raise DataError(f"gene {gene} out of range for K={model.K}")
    h = rng.standard_normal((n, model.d_h))
    cond = np.zeros((n, model.K))
    cond[:, gene] = 1.0
    return generate(model, h, cond)


def export_distribution(
    ds: SeriesDataset,
    assignment: GeneAssignment,
    model: GeneModel,
    path: str,
    seed: int = 0,
    max_segments_per_gene: int = 200,
):
    """CSV of scalar observations: gene_id,source,value.

    Real rows come from the dataset's windows of each gene (capped at
    max_segments_per_gene segments, deterministic head); generated rows
    come from prior samples of matching count.
    """
    import os

    segments = ds.segments()
    hard = assignment.flat_hard()
    rng = Rng.derive(seed, 5)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write("gene_id,source,value\n")
        for k in range(model.K):
            rows = np.where(hard == k)[0][:max_segments_per_gene]
            if rows.size == 0:
                continue
            for v in segments[rows].ravel():
                f.write(f"{k},real,{float(v)!r}\n")
            fake = sample_segments(model, k, rows.size, rng)
            for v in fake.ravel():
                f.write(f"{k},generated,{float(v)!r}\n")
    os.replace(tmp, path)
