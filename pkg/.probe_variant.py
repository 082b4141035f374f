import sys
import time
import numpy as np
from sklearn.metrics import homogeneity_score
from evogene.data import SeriesDataset, Sample, DatasetMeta
from evogene.numcore import Rng
from evogene.recognition import init_assignment, recognition_refine


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


for shared in (False, True):
    name = "shared" if shared else "pervar"
    for seed in (0, 1, 2):
        t0 = time.time()
        ds, truth = gen(shared, seed)
        wt = np.repeat(truth, 10)
        res = recognition_refine(ds, K=5, seed=seed, max_outer=5,
                                 epochs_per_round=10, tol=0.01, batch_size=2000)
        h_init = homogeneity_score(wt, res.init_hard.ravel())
        h_rounds = [round(homogeneity_score(wt, h.ravel()), 4) for h in res.round_hard]
        h_final = homogeneity_score(wt, res.assignment.flat_hard())
        print(f"{name} seed={seed} init={h_init:.4f} rounds={h_rounds} "
              f"final={h_final:.4f} errs={[round(e,3) for e in res.error_rates]} "
              f"{time.time()-t0:.0f}s", flush=True)
