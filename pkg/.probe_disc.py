import numpy as np
from evogene.data import DatasetMeta, Sample, SeriesDataset
from evogene.recognition import GeneAssignment
from evogene.generation import train_genes, sample_segments, discriminate
from evogene.numcore import Rng

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

ds, assignment = two_gaussian_ds()
segments = ds.segments()
for ep in (1, 2, 3, 5, 8, 12, 20):
    model, tr = train_genes(ds, assignment, K=2, seed=3, epochs=ep, lr=0.01, batch_size=100)
    p_real, _ = discriminate(model, segments)
    rng = Rng(13)
    fakes = np.concatenate([sample_segments(model, k, 100, rng) for k in (0, 1)])
    p_fake, _ = discriminate(model, fakes)
    print(f"ep={ep:2d}: p_real={p_real.mean():.4f} p_fake={p_fake.mean():.4f} "
          f"margin={p_real.mean()-p_fake.mean():+.4f} d_loss={tr[-1]['d_loss']:.4f}")
