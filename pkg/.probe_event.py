import numpy as np
from evogene.data import generate_mixed_synthetic
from evogene.recognition import GeneAssignment, new_classifier, train_classifier, classifier_apply
from evogene.generation import train_genes
from evogene.application import train_end_to_end, predict_batch
from evogene.evaluation import fbeta_metrics

ds, wc = generate_mixed_synthetic(
    n_samples=120, n_clusters=2, W=3, T=12, S=1, seed=2,
    mu_range=(5.0, 6.0), sigma_ranges=[(0.2, 0.3), (3.0, 3.2)],
)
K = 2
assignment = GeneAssignment.from_hard(wc, K)
clf = new_classifier(ds, K, seed=2)
hist = train_classifier(clf, ds.segments(), assignment.flat_hard(), epochs=30, lr=0.01, batch_size=50, seed=2)
probs = classifier_apply(clf, ds.segments())
clf_acc = (probs.argmax(axis=1) == assignment.flat_hard()).mean()
print(f"classifier acc vs true wc: {clf_acc:.4f}  ce[0]={hist[0]:.4f} ce[-1]={hist[-1]:.4f}")
print("label balance:", np.bincount(ds.labels()))

genes, _ = train_genes(ds, assignment, K, seed=2, epochs=5, batch_size=50)
idx = np.arange(len(ds))
train, test = ds.subset(idx[:90]), ds.subset(idx[90:])
model, trace = train_end_to_end(train, clf, genes, "event", seed=2, epochs=40, batch_size=30)
vals = [r["val"] for r in trace]
apps = [r["app"] for r in trace]
print(f"val[0:5]={np.round(vals[:5],3)} val_max={max(vals):.3f} argmax={int(np.argmax(vals))} val[-1]={vals[-1]:.3f}")
print(f"app[0]={apps[0]:.4f} app[-1]={apps[-1]:.4f}")
out_tr = predict_batch(model, train.stacked())
acc_tr = (out_tr.argmax(axis=1) == train.labels()).mean()
out = predict_batch(model, test.stacked())
acc = (out.argmax(axis=1) == test.labels()).mean()
print(f"train acc={acc_tr:.3f} test acc={acc:.3f}")
print("test label balance:", np.bincount(test.labels()))
