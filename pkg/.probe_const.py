import time
import numpy as np
from evogene.data import DatasetMeta, Sample, SeriesDataset
from evogene.recognition import new_classifier
from evogene.generation import new_gene_model
from evogene.application import train_end_to_end, predict_batch
from evogene.evaluation import mape

def make_ds(n, seed=3):
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(n):
        level = rng.uniform(2.0, 6.0)
        win = np.full((4, 3, 1), level)
        samples.append(Sample(id=f"c{i}", windows=win[:3], label=0, next_window=win[3]))
    return SeriesDataset(samples, DatasetMeta(W=3, T=3, S=1, classes=(0,)))

for n, batch, epochs, decay in [
    (24, 8, 40, 20),
    (24, 2, 60, 20),
    (24, 2, 60, 1000),
    (96, 8, 60, 20),
    (96, 4, 60, 1000),
    (96, 8, 100, 40),
]:
    ds = make_ds(n)
    clf = new_classifier(ds, 2, 3)
    genes = new_gene_model(ds, 2, 3)
    t0 = time.time()
    model, trace = train_end_to_end(
        ds, clf, genes, "value", seed=3, epochs=epochs, batch_size=batch,
        lam1=0.0, lam2=0.0, fine_tune_lr=0.0, val_frac=0.0,
        lr_decay_every=decay,
    )
    pred = predict_batch(model, ds.stacked())
    got, _ = mape(ds.next_windows().reshape(len(ds), -1), pred)
    print(f"n={n:3d} batch={batch} epochs={epochs:3d} decay={decay:4d}: "
          f"mape={got:7.3f} app_last={trace[-1]['app']:.5f} [{time.time()-t0:.1f}s]")
