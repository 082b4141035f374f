import time
import numpy as np
from sklearn.metrics import homogeneity_score
from evogene.data import generate_synthetic
from evogene.recognition import recognition_refine

finals, inits = [], []
for seed in (0, 1, 2):
    t0 = time.time()
    ds, truth = generate_synthetic(samples_per_cluster=2000, seed=seed)
    wt = np.repeat(truth, ds.meta.W)
    res = recognition_refine(ds, K=5, seed=seed, max_outer=5,
                             epochs_per_round=30, tol=0.01, batch_size=2000)
    h_init = homogeneity_score(wt, res.init_hard.ravel())
    h_rounds = [round(homogeneity_score(wt, h.ravel()), 4) for h in res.round_hard]
    h_final = homogeneity_score(wt, res.assignment.flat_hard())
    inits.append(h_init); finals.append(h_final)
    print(f"seed={seed} init={h_init:.4f} rounds={h_rounds} final={h_final:.4f} "
          f"errs={[round(e, 3) for e in res.error_rates]} {time.time()-t0:.0f}s",
          flush=True)
print(f"median init={np.median(inits):.4f} median final={np.median(finals):.4f}", flush=True)
