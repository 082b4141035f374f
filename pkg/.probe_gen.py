import time
import numpy as np
from evogene.data import DatasetMeta, Sample, SeriesDataset
from evogene.recognition import GeneAssignment
from evogene.generation import train_genes, sample_segments, new_gene_model
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

def naive_kl(real, fake, bins=50):
    lo = min(real.min(), fake.min()); hi = max(real.max(), fake.max())
    cr, _ = np.histogram(real, bins=bins, range=(lo, hi))
    cf, _ = np.histogram(fake, bins=bins, range=(lo, hi))
    p = (cr + 1.0) / (cr + 1.0).sum(); q = (cf + 1.0) / (cf + 1.0).sum()
    return float(np.sum(p * np.log(p / q)))

ds, assignment = two_gaussian_ds()
segments = ds.segments()
hard = assignment.flat_hard()
fresh = new_gene_model(ds, K=2, seed=3)

for epochs, lr in [(30, 0.001), (30, 0.01), (100, 0.001), (100, 0.01), (200, 0.01)]:
    t0 = time.time()
    model, traces = train_genes(ds, assignment, K=2, seed=3, epochs=epochs, lr=lr, batch_size=100)
    msg = f"ep={epochs:3d} lr={lr}: "
    ok = True
    for k in (0, 1):
        real = segments[hard == k].ravel()
        rng = Rng(11)
        before = naive_kl(real, sample_segments(fresh, k, 200, rng).ravel())
        rng = Rng(11)
        after = naive_kl(real, sample_segments(model, k, 200, rng).ravel())
        gm = sample_segments(model, k, 400, Rng(5)).mean()
        rm = real.mean()
        msg += f"g{k}: mean {gm:7.2f}/{rm:6.2f} kl {before:.3f}->{after:.3f}  "
        ok = ok and after < before and abs(gm - rm) <= 0.1 * abs(rm)
    print(msg + f"ok={ok} [{time.time()-t0:.0f}s]", flush=True)
