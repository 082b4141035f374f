import numpy as np
from evogene.data import DatasetMeta, Sample, SeriesDataset
from evogene.recognition import new_classifier
from evogene.generation import new_gene_model, enc_forward
from evogene.application import train_end_to_end, predict_batch, fuse_graph, head_graph
from evogene.evaluation import mape
from evogene.numcore import Tensor, no_grad, Rng
from evogene.recognition import classifier_apply

def make_ds(n, seed=3):
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(n):
        level = rng.uniform(2.0, 6.0)
        win = np.full((4, 3, 1), level)
        samples.append(Sample(id=f"c{i}", windows=win[:3], label=0, next_window=win[3]))
    return SeriesDataset(samples, DatasetMeta(W=3, T=3, S=1, classes=(0,)))

ds = make_ds(96)
clf = new_classifier(ds, 2, 3)
genes = new_gene_model(ds, 2, 3)
model, trace = train_end_to_end(
    ds, clf, genes, "value", seed=3, epochs=60, batch_size=4,
    lam1=0.0, lam2=0.0, fine_tune_lr=0.0, val_frac=0.0, lr_decay_every=1000,
)

# channel-wise input weight norms: x block, a block, h block
f_w = model.params["f_w"].data
xd = ds.meta.T * ds.meta.S
K = 2
print("in_dim:", f_w.shape, "x block", xd, "a block", K, "h block", f_w.shape[0] - xd - K - model.params["f_u"].data.shape[0])
d_H = model.params["f_u"].data.shape[0]
# f_w is (in_dim, d_H); in = [x, a, h, H_prev? no, H via f_u]
hx = np.linalg.norm(f_w[:xd]); ha = np.linalg.norm(f_w[xd:xd+K]); hh = np.linalg.norm(f_w[xd+K:])
print(f"|w_x|={hx:.3f} |w_a|={ha:.3f} |w_h|={hh:.3f}")

# eval-style prediction
pred_eval = predict_batch(model, ds.stacked())
tgt = ds.next_windows().reshape(len(ds), -1)
m_eval, _ = mape(tgt, pred_eval)

# train-style prediction: same fixed assignment cond (from classifier), sampled z
w_all = ds.stacked()
n, W = w_all.shape[0], ds.meta.W
mean, std = genes.flat_stats()
x_std_all = (w_all.reshape(n, W, -1) - mean[None]) / std[None]
segs = w_all.reshape(n * W, ds.meta.T, ds.meta.S)
probs = classifier_apply(clf, segs).reshape(n, W, -1)
hard = probs.reshape(n * W, -1).argmax(axis=1)
cond_hard = np.zeros((n * W, K)); cond_hard[np.arange(n * W), hard] = 1.0
rng_z = Rng.derive(99, 7)
mapes = []
for rep in range(5):
    h_steps, x_steps, a_steps = [], [], []
    with no_grad():
        for st in range(W):
            rows = np.arange(n) * W + st
            mu_t, ls_t = enc_forward(genes, Tensor(x_std_all[:, st]), Tensor(cond_hard[rows]))
            z = rng_z.standard_normal(mu_t.data.shape)
            h_steps.append(Tensor(mu_t.data + z * np.exp(ls_t.data)))
            x_steps.append(Tensor(x_std_all[:, st]))
            a_steps.append(Tensor(probs[:, st]))
        H = fuse_graph(model, x_steps, a_steps, h_steps)[-1]
        out = head_graph(model, H).data
    m, _ = mape(tgt, out)
    mapes.append(m)
print(f"eval-style mape={m_eval:.3f}  train-style (sampled z) mape={np.mean(mapes):.3f} +- {np.std(mapes):.3f}")

# scale of latent noise vs mean
with no_grad():
    mu_t, ls_t = enc_forward(genes, Tensor(x_std_all[:, 0]), Tensor(cond_hard[np.arange(n) * W]))
print("enc mu range", np.round([mu_t.data.min(), mu_t.data.max()], 3),
      "sigma range", np.round([np.exp(ls_t.data).min(), np.exp(ls_t.data).max()], 3),
      "latent dim", mu_t.data.shape[1])
