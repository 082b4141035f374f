"""Encoder/generator/discriminator contracts, losses, and training."""

import warnings

import numpy as np
import pytest

from evogene.data import DatasetMeta, Sample, SeriesDataset
from evogene.errors import DimensionError
from evogene.generation import (
    GeneModel,
    LatentCode,
    d_loss,
    discriminate,
    encode,
    export_distribution,
    g_fm_loss,
    generate,
    kl_loss,
    new_gene_model,
    sample_latent,
    sample_segments,
    train_genes,
)
from evogene.numcore import Rng, Tensor
from evogene.recognition import GeneAssignment


def two_gaussian_ds(n_per=100, mean_a=80.0, mean_b=120.0, sd=2.0, W=2, T=10, S=1,
                    seed=0):
    """Two genes of plain Gaussians, every sample pure one gene."""
    rng = np.random.default_rng(seed)
    samples, hard = [], []
    for g, mean in enumerate((mean_a, mean_b)):
        for j in range(n_per):
            w = mean + sd * rng.normal(size=(W, T, S))
            samples.append(Sample(id=f"g{g}-{j}", windows=w))
            hard.append([g] * W)
    ds = SeriesDataset(samples, DatasetMeta(W=W, T=T, S=S))
    assignment = GeneAssignment.from_hard(np.array(hard), 2)
    return ds, assignment


@pytest.fixture(scope="module")
def trained_two_gene():
    # lr raised over the default: the toy set yields 4 batches per epoch
    ds, assignment = two_gaussian_ds()
    model, traces = train_genes(
        ds, assignment, K=2, seed=3, epochs=30, lr=0.01, batch_size=100
    )
    return ds, assignment, model, traces


def naive_histogram_kl(real, fake, bins=50):
    """Independent reference: union-range histogram, add-one smoothing."""
    lo = min(real.min(), fake.min())
    hi = max(real.max(), fake.max())
    cr, edges = np.histogram(real, bins=bins, range=(lo, hi))
    cf, _ = np.histogram(fake, bins=bins, range=(lo, hi))
    p = (cr + 1.0) / (cr + 1.0).sum()
    q = (cf + 1.0) / (cf + 1.0).sum()
    return float(np.sum(p * np.log(p / q)))


# ----------------------------------------------------------------- latents

def test_latent_code_recomputes_h():
    code = LatentCode(
        mu=np.array([1.0, 2.0]),
        log_scale=np.array([0.0, np.log(2.0)]),
        z=np.array([0.5, -1.0]),
    )
    np.testing.assert_allclose(code.h, [1.5, 0.0])


def test_sample_latent_zero_z_returns_mu():
    class ZeroRng:
        def standard_normal(self, shape):
            return np.zeros(shape)

    mu = np.array([3.0, -1.0])
    h = sample_latent(mu, np.zeros(2), ZeroRng())
    np.testing.assert_array_equal(h, mu)


def test_sample_latent_tiny_scale_collapses_to_mu():
    mu = np.array([0.5, 0.25, -2.0])
    h = sample_latent(mu, np.full(3, -50.0), Rng(0))
    np.testing.assert_allclose(h, mu, atol=1e-12)


def test_sample_latent_unit_scale_std():
    n = 100_000
    h = sample_latent(np.zeros((n, 4)), np.zeros((n, 4)), Rng(7))
    np.testing.assert_allclose(h.std(axis=0), 1.0, atol=0.02)


def test_sample_latent_shape_mismatch():
    with pytest.raises(DimensionError):
        sample_latent(np.zeros(3), np.zeros(4), Rng(0))


# ---------------------------------------------------------------- kl_loss

def test_kl_identities():
    assert kl_loss(np.zeros(4), np.zeros(4)) == 0.0
    assert kl_loss(np.array([1.0, 1.0]), np.zeros(2)) == pytest.approx(1.0, abs=1e-12)
    got = kl_loss(np.zeros(1), np.array([np.log(2.0)]))
    assert got == pytest.approx(0.5 * (2.0 - np.log(2.0) - 1.0), abs=1e-12)


def test_kl_nonnegative_random():
    rng = np.random.default_rng(0)
    for _ in range(50):
        mu = rng.normal(size=5)
        ls = rng.normal(size=5) * 0.5
        assert kl_loss(mu, ls) > 0.0


def test_kl_batch_averages_rows():
    mu = np.array([[1.0, 1.0], [0.0, 0.0]])
    ls = np.zeros((2, 2))
    assert kl_loss(mu, ls) == pytest.approx(0.5)


def test_kl_tensor_path_gradient():
    mu = Tensor(np.array([0.3, -0.2]), requires_grad=True)
    ls = Tensor(np.array([0.1, 0.4]), requires_grad=True)
    out = kl_loss(mu, ls)
    assert isinstance(out, Tensor)
    out.backward()
    np.testing.assert_allclose(mu.grad, mu.data)
    np.testing.assert_allclose(ls.grad, 0.5 * (np.exp(ls.data) - 1.0))


# ------------------------------------------------------------ d / fm losses

def test_d_loss_identities():
    half = np.full(8, 0.5)
    assert d_loss(half, half) == pytest.approx(2.0 * np.log(2.0), abs=1e-12)
    assert d_loss(np.array([1.0]), np.array([0.0])) == pytest.approx(0.0, abs=1e-12)
    assert d_loss(np.array([0.9]), np.array([0.1])) == pytest.approx(
        -2.0 * np.log(0.9), abs=1e-12
    )


def test_d_loss_clamps_extremes():
    out = d_loss(np.array([0.0]), np.array([1.0]))
    assert np.isfinite(out)
    assert out == pytest.approx(-2.0 * np.log(1e-12))


def test_g_fm_identities():
    rng = np.random.default_rng(1)
    batch = rng.normal(size=(6, 4))
    assert g_fm_loss(batch, batch.copy()) == 0.0
    a = np.array([[1.0, 0.0], [1.0, 0.0]])
    b = np.zeros((2, 2))
    assert g_fm_loss(a, b) == pytest.approx(1.0)


def test_g_fm_permutation_invariant():
    rng = np.random.default_rng(2)
    real = rng.normal(size=(10, 5))
    fake = rng.normal(size=(10, 5))
    base = g_fm_loss(real, fake)
    assert g_fm_loss(real[::-1], fake[rng.permutation(10)]) == pytest.approx(base)


def test_g_fm_width_mismatch():
    with pytest.raises(DimensionError):
        g_fm_loss(np.zeros((2, 3)), np.zeros((2, 4)))


# ------------------------------------------------------------ forward edges

def test_encode_zero_heads_give_zero():
    ds, _ = two_gaussian_ds(n_per=3)
    model = new_gene_model(ds, K=2, seed=0)
    for name in ("e_mu_w", "e_mu_b", "e_ls_w", "e_ls_b"):
        model.enc[name].data[:] = 0.0
    mu, ls = encode(model, ds.samples[0].windows[0], np.array([1.0, 0.0]))
    np.testing.assert_array_equal(mu, np.zeros(32))
    np.testing.assert_array_equal(ls, np.zeros(32))


def test_encode_deterministic():
    ds, _ = two_gaussian_ds(n_per=3)
    model = new_gene_model(ds, K=2, seed=1)
    seg = ds.samples[0].windows[1]
    a = encode(model, seg, np.array([0.0, 1.0]))
    b = encode(model, seg, np.array([0.0, 1.0]))
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_encode_rejects_bad_condition():
    ds, _ = two_gaussian_ds(n_per=3)
    model = new_gene_model(ds, K=2, seed=0)
    with pytest.raises(DimensionError):
        encode(model, ds.samples[0].windows[0], np.array([0.7, 0.7]))


def test_generate_zeroed_params_give_zero_segment():
    ds, _ = two_gaussian_ds(n_per=3)
    model = new_gene_model(ds, K=2, seed=0)
    for name in model.gen.names():
        model.gen[name].data[:] = 0.0
    out = generate(model, np.zeros(32), np.array([1.0, 0.0]))
    np.testing.assert_array_equal(out, np.zeros((10, 1)))


def test_generate_deterministic_and_shaped():
    ds, _ = two_gaussian_ds(n_per=3)
    model = new_gene_model(ds, K=2, seed=2)
    h = Rng(0).standard_normal(32)
    a = generate(model, h, np.array([1.0, 0.0]))
    b = generate(model, h, np.array([1.0, 0.0]))
    assert a.shape == (10, 1)
    np.testing.assert_array_equal(a, b)


def test_discriminate_zero_final_layer_is_half():
    ds, _ = two_gaussian_ds(n_per=3)
    model = new_gene_model(ds, K=2, seed=0)
    model.disc["d_out_w"].data[:] = 0.0
    p, feats = discriminate(model, ds.samples[0].windows[0])
    assert p == pytest.approx(0.5, abs=1e-12)
    assert feats.shape == (64,)


def test_discriminate_batch_shapes():
    ds, _ = two_gaussian_ds(n_per=4)
    model = new_gene_model(ds, K=2, seed=0)
    p, feats = discriminate(model, ds.segments())
    assert p.shape == (16,)
    assert feats.shape == (16, 64)
    assert np.all((p > 0) & (p < 1))


# ------------------------------------------------------------------ training

def test_train_genes_zero_epochs_is_noop():
    ds, assignment = two_gaussian_ds(n_per=5)
    model, traces = train_genes(ds, assignment, K=2, seed=4, epochs=0)
    fresh = new_gene_model(ds, K=2, seed=4)
    assert traces == []
    for got, ref in ((model.enc, fresh.enc), (model.gen, fresh.gen),
                     (model.disc, fresh.disc)):
        for name, arr in ref.state_arrays().items():
            np.testing.assert_array_equal(got[name].data, arr)


def test_train_genes_bit_deterministic():
    ds, assignment = two_gaussian_ds(n_per=10)
    a, _ = train_genes(ds, assignment, K=2, seed=9, epochs=2, batch_size=20)
    b, _ = train_genes(ds, assignment, K=2, seed=9, epochs=2, batch_size=20)
    for sa, sb in ((a.enc, b.enc), (a.gen, b.gen), (a.disc, b.disc)):
        for name, arr in sa.state_arrays().items():
            np.testing.assert_array_equal(arr, sb[name].data)


def test_train_genes_warns_on_empty_gene():
    ds, _ = two_gaussian_ds(n_per=4)
    hard = np.zeros((8, 2), dtype=int)
    hard[4:] = 1
    assignment = GeneAssignment.from_hard(hard, 3)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        train_genes(ds, assignment, K=3, seed=0, epochs=1, batch_size=8)
    assert any("gene 2" in str(w.message) for w in caught)


def test_train_genes_reduces_per_gene_histogram_kl(trained_two_gene):
    ds, assignment, model, _ = trained_two_gene
    fresh = new_gene_model(ds, K=2, seed=3)
    segments = ds.segments()
    hard = assignment.flat_hard()
    rng = Rng(11)
    for k in (0, 1):
        real = segments[hard == k].ravel()
        before = naive_histogram_kl(real, sample_segments(fresh, k, 200, rng).ravel())
        after = naive_histogram_kl(real, sample_segments(model, k, 200, rng).ravel())
        assert after < before


def test_trained_generator_matches_gene_means(trained_two_gene):
    ds, assignment, model, _ = trained_two_gene
    segments = ds.segments()
    hard = assignment.flat_hard()
    rng = Rng(5)
    for k in (0, 1):
        real_mean = segments[hard == k].mean()
        gen_mean = sample_segments(model, k, 400, rng).mean()
        assert abs(gen_mean - real_mean) <= 0.1 * abs(real_mean)


def test_trained_encoder_is_condition_sensitive(trained_two_gene):
    ds, _, model, _ = trained_two_gene
    seg = ds.samples[0].windows[0]
    mu_a, _ = encode(model, seg, np.array([1.0, 0.0]))
    mu_b, _ = encode(model, seg, np.array([0.0, 1.0]))
    assert np.max(np.abs(mu_a - mu_b)) > 1e-6


def test_discriminator_learns_to_separate_fixed_generator():
    # against a frozen generator the real/fake objective must push real
    # scores above fake ones; inside the full adversarial loop the
    # generator keeps the margin near zero, so the mechanics are checked
    # here in isolation
    from evogene.generation import disc_forward
    from evogene.numcore import sgd_step

    ds, _ = two_gaussian_ds()
    model = new_gene_model(ds, K=2, seed=3)
    real = ds.segments().reshape(400, -1)
    rng = Rng(13)
    fakes = np.concatenate(
        [sample_segments(model, k, 200, rng) for k in (0, 1)]
    ).reshape(400, -1)
    first = None
    for _ in range(60):
        p_r, _ = disc_forward(model, Tensor(real))
        p_f, _ = disc_forward(model, Tensor(fakes))
        loss = d_loss(p_r, p_f)
        loss.backward()
        sgd_step(model.disc, 0.01)
        first = float(loss.data) if first is None else first
    assert float(loss.data) < first
    assert p_r.data.mean() > p_f.data.mean()


def test_ablation_path_runs_and_records_recon():
    ds, assignment = two_gaussian_ds(n_per=10)
    model, traces = train_genes(
        ds, assignment, K=2, seed=1, epochs=3, batch_size=20, adversarial=False
    )
    assert len(traces) == 3
    assert all(np.isfinite(t["fit"]) and np.isfinite(t["kl"]) for t in traces)
    assert all(t["d_loss"] == 0.0 for t in traces)


def test_export_distribution_writes_parseable_rows(tmp_path):
    ds, assignment = two_gaussian_ds(n_per=5)
    model = new_gene_model(ds, K=2, seed=0)
    path = str(tmp_path / "dist.csv")
    export_distribution(ds, assignment, model, path, seed=0,
                        max_segments_per_gene=3)
    lines = open(path).read().strip().split("\n")
    assert lines[0] == "gene_id,source,value"
    # 2 genes x (3 real + 3 generated) segments x T values
    assert len(lines) == 1 + 2 * 2 * 3 * ds.meta.T
    seen = set()
    for line in lines[1:]:
        gene, source, value = line.split(",")
        assert gene in {"0", "1"}
        assert source in {"real", "generated"}
        float(value)
        seen.add((gene, source))
    assert len(seen) == 4


def test_export_distribution_reruns_byte_identical(tmp_path):
    ds, assignment = two_gaussian_ds(n_per=5)
    model = new_gene_model(ds, K=2, seed=0)
    a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    export_distribution(ds, assignment, model, a, seed=4)
    export_distribution(ds, assignment, model, b, seed=4)
    assert open(a, "rb").read() == open(b, "rb").read()
