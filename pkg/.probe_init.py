import time
import numpy as np
from sklearn.metrics import homogeneity_score
from evogene.data import generate_synthetic, window_features
from evogene.recognition import kmeans_fit
from evogene.kernels import kmeans_assign

def inertia(pts, cents, labels):
    return float(np.sum((pts - cents[labels]) ** 2))

for pv in (True, False):
    for seed in (0, 1, 2):
        ds, truth = generate_synthetic(samples_per_cluster=2000, seed=seed, per_variable=pv)
        wt = np.repeat(truth, ds.meta.W)
        feats = window_features(ds)
        z = (feats - feats.mean(axis=0)) / np.maximum(feats.std(axis=0), 1e-12)
        t0 = time.time()
        for name, F in (("raw", feats), ("std", z)):
            _, lab1 = kmeans_fit(F, 5, seed)
            h1 = homogeneity_score(wt, lab1)
            best = None
            for r in range(10):
                cents, lab = kmeans_fit(F, 5, seed * 101 + r)
                i = inertia(F, cents, lab)
                if best is None or i < best[0]:
                    best = (i, lab)
            h10 = homogeneity_score(wt, best[1])
            print(f"pv={pv} seed={seed} {name}: single={h1:.4f} best10={h10:.4f}", flush=True)
        print(f"  [{time.time()-t0:.0f}s]", flush=True)
