import numpy as np
from evogene.data import DatasetMeta, Sample, SeriesDataset
from evogene.recognition import GeneAssignment
from evogene.generation import new_gene_model, sample_segments, discriminate, disc_forward, d_loss
from evogene.numcore import Rng, Tensor, sgd_step

def two_gaussian_ds(n_per=100, mean_a=80.0, mean_b=120.0, sd=2.0, W=2, T=10, S=1, seed=0):
    rng = np.random.default_rng(seed)
    samples, hard = [], []
    for g, mean in enumerate((mean_a, mean_b)):
        for j in range(n_per):
            w = mean + sd * rng.normal(size=(W, T, S))
            samples.append(Sample(id=f"g{g}-{j}", windows=w))
            hard.append([g] * W)
    ds = SeriesDataset(samples, DatasetMeta(W=W, T=T, S=S))
    return ds, GeneAssignment.from_hard(np.array(hard), 2)

ds, _ = two_gaussian_ds()
model = new_gene_model(ds, K=2, seed=3)
real = ds.segments().reshape(400, -1)
rng = Rng(13)
fakes = np.concatenate([sample_segments(model, k, 200, rng) for k in (0, 1)]).reshape(400, -1)
for step in range(60):
    p_r, _ = disc_forward(model, Tensor(real))
    p_f, _ = disc_forward(model, Tensor(fakes))
    loss = d_loss(p_r, p_f)
    loss.backward()
    sgd_step(model.disc, 0.01)
    if step % 10 == 9 or step == 0:
        print(f"step={step+1:2d} d_loss={float(loss.data):.4f} "
              f"p_real={p_r.data.mean():.4f} p_fake={p_f.data.mean():.4f}")
