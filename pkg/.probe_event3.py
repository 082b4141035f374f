import time
import numpy as np
from evogene.data import generate_mixed_synthetic
from evogene.recognition import GeneAssignment, new_classifier, train_classifier
from evogene.generation import train_genes
from evogene.application import train_end_to_end, predict_batch
from evogene.evaluation import fbeta_metrics

def run(n, epochs, batch, decay=20, seed=2):
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
    model, trace = train_end_to_end(
        train, clf, genes, "event", seed=seed, epochs=epochs, batch_size=batch,
        lr_decay_every=decay,
    )
    out_tr = predict_batch(model, train.stacked())
    acc_tr = (out_tr.argmax(axis=1) == train.labels()).mean()
    out = predict_batch(model, test.stacked())
    pred = out.argmax(axis=1)
    acc = (pred == test.labels()).mean()
    f1 = fbeta_metrics(test.labels(), pred, positive=1).metrics["f1"]
    vals = [r["val"] for r in trace]
    print(f"n={n} ep={epochs:3d} b={batch:2d} decay={decay}: train={acc_tr:.3f} test={acc:.3f} f1={f1:.3f} "
          f"val_max={max(vals):.3f}@{int(np.argmax(vals))} app[-1]={trace[-1]['app']:.4f} [{time.time()-t0:.1f}s]")

run(240, 60, 5)
run(240, 80, 5, decay=40)
run(360, 60, 5)
