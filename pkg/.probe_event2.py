import time
import numpy as np
from evogene.data import generate_mixed_synthetic
from evogene.recognition import GeneAssignment, new_classifier, train_classifier
from evogene.generation import train_genes
from evogene.application import train_end_to_end, predict_batch

def run(n, epochs, batch, seed=2):
    ds, wc = generate_mixed_synthetic(
        n_samples=n, n_clusters=2, W=3, T=12, S=1, seed=seed,
        mu_range=(5.0, 6.0), sigma_ranges=[(0.2, 0.3), (3.0, 3.2)],
    )
    K = 2
    assignment = GeneAssignment.from_hard(wc, K)
    clf = new_classifier(ds, K, seed=seed)
    train_classifier(clf, ds.segments(), assignment.flat_hard(), epochs=30, lr=0.01, batch_size=50, seed=seed)
    genes, _ = train_genes(ds, assignment, K, seed=seed, epochs=5, batch_size=50)
    idx = np.arange(len(ds))
    cut = int(n * 0.75)
    train, test = ds.subset(idx[:cut]), ds.subset(idx[cut:])
    t0 = time.time()
    model, trace = train_end_to_end(train, clf, genes, "event", seed=seed, epochs=epochs, batch_size=batch)
    out_tr = predict_batch(model, train.stacked())
    acc_tr = (out_tr.argmax(axis=1) == train.labels()).mean()
    out = predict_batch(model, test.stacked())
    acc = (out.argmax(axis=1) == test.labels()).mean()
    vals = [r["val"] for r in trace]
    print(f"n={n} epochs={epochs:3d} batch={batch:2d}: train={acc_tr:.3f} test={acc:.3f} "
          f"val_max={max(vals):.3f}@{int(np.argmax(vals))} app[-1]={trace[-1]['app']:.4f} [{time.time()-t0:.1f}s]")

run(120, 40, 30)
run(120, 100, 30)
run(120, 100, 10)
run(240, 100, 10)
