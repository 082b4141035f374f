import time
import numpy as np
from sklearn.metrics import homogeneity_score
from evogene.data import SeriesDataset, Sample, DatasetMeta
from evogene.numcore import Rng
from evogene.recognition import (
    init_assignment, new_classifier, train_classifier, classifier_apply,
)


def gen(shared, seed, spc=2000, K=5, W=10, T=20, S=3):
    rng = Rng(seed)
    if shared:
        mu = rng.uniform(20.0, 30.0, size=(K, 2, 1)) * np.ones((1, 1, S))
        sg = rng.uniform(0.0, 5.0, size=(K, 2, 1)) * np.ones((1, 1, S))
    else:
        mu = rng.uniform(20.0, 30.0, size=(K, 2, S))
        sg = rng.uniform(0.0, 5.0, size=(K, 2, S))
    samples = []
    for i in range(K):
        comp = rng.uniform(0.0, 1.0, size=(spc, W, T, S)) < 0.5
        z = rng.standard_normal((spc, W, T, S))
        vals = np.where(comp, mu[i, 0], mu[i, 1]) + np.where(comp, sg[i, 0], sg[i, 1]) * z
        for j in range(spc):
            samples.append(Sample(id=f"s{i}-{j}", windows=vals[j], label=i))
    meta = DatasetMeta(W=W, T=T, S=S, classes=tuple(range(K)))
    truth = np.repeat(np.arange(K), spc)
    return SeriesDataset(samples, meta), truth


for shared, seed in ((True, 1), (False, 1), (True, 2)):
    name = "shared" if shared else "pervar"
    ds, truth = gen(shared, seed)
    wt = np.repeat(truth, 10)
    segs = ds.segments()
    init = init_assignment(ds, K := 5, seed)
    km = init.flat_hard()
    h_init = homogeneity_score(wt, km)
    print(f"{name} seed={seed} init_homog={h_init:.4f}", flush=True)
    clf = new_classifier(ds, K, seed, hidden=32)
    t0 = time.time()
    for block in range(12):
        hist = train_classifier(clf, segs, km, epochs=10, lr=0.01,
                                batch_size=2000, seed=seed,
                                epoch_offset=block * 10)
        pred = classifier_apply(clf, segs).argmax(axis=1)
        agree = float(np.mean(pred == km))
        h = homogeneity_score(wt, pred)
        print(f"  ep={10*(block+1):3d} ce={hist[-1]:.4f} agree_km={agree:.4f} "
              f"homog={h:.4f} ({time.time()-t0:.0f}s)", flush=True)
