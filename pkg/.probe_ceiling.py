import time

import numpy as np

from evogene.data import generate_synthetic
from evogene.evaluation import homogeneity
from evogene.recognition import (
    classifier_apply,
    new_classifier,
    recognition_refine,
    train_classifier,
)

for seed in (1, 2):
    ds, truth = generate_synthetic(samples_per_cluster=2000, seed=seed)
    truth_w = np.repeat(truth, ds.meta.W)
    segs = ds.segments()

    t0 = time.time()
    clf = new_classifier(ds, 5, seed)
    train_classifier(clf, segs, truth_w, epochs=30, lr=0.01, batch_size=2000, seed=seed)
    pred = classifier_apply(clf, segs).argmax(axis=1)
    acc = float(np.mean(pred == truth_w))
    hom = homogeneity(truth_w, pred)
    print(f"seed={seed} supervised ceiling: acc={acc:.4f} hom={hom:.4f} {time.time()-t0:.0f}s", flush=True)

    t0 = time.time()
    res = recognition_refine(ds, 5, seed, epochs_per_round=45)
    homs = [homogeneity(truth_w, h.reshape(-1)) for h in res.round_hard]
    print(
        f"seed={seed} refine45: init={homogeneity(truth_w, res.init_hard.reshape(-1)):.4f} "
        f"rounds={[round(h, 4) for h in homs]} final={homs[-1]:.4f} "
        f"errs={[round(e, 3) for e in res.error_rates]} {time.time()-t0:.0f}s",
        flush=True,
    )
