"""Command line front end covering the pipeline stages.

Every subcommand resolves a RunConfig from three layers (built-in
defaults, then a --config JSON file, then explicit flags), prints the
fingerprint of the resolved config, and exits 0 on success, 1 on usage
errors, 2 on data errors, 3 on numeric failures. Output files are
written atomically, and a rerun with identical arguments and input
files reproduces them byte for byte.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile

import numpy as np

from .application import (
    PredictorModel,
    new_predictor,
    predict_batch,
    save_predictions,
    train_end_to_end,
)
from .data import (
    DatasetMeta,
    Sample,
    SeriesDataset,
    generate_synthetic,
    load_dataset,
    save_dataset,
)
from .errors import DataError, DimensionError, NumericError
from .evaluation import (
    MetricReport,
    clustering_metrics,
    config_fingerprint,
    fbeta_metrics,
    mape,
    silhouette,
)
from .data import window_features
from .generation import (
    GeneModel,
    export_distribution,
    new_gene_model,
    train_genes,
)
from .persistence import load_checkpoint, restore_store, save_checkpoint
from .recognition import (
    ClassifierC,
    GeneAssignment,
    classifier_apply,
    new_classifier,
    recognition_refine,
    save_assignment_csv,
)


class UsageError(Exception):
    """Bad command line or config file; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Every knob a run can turn, resolved before any work starts.

    The generic --epochs and --batch flags land on the stage the
    subcommand drives (refine_*, gene_* or train_*); --config keys
    address the fields by these names directly.
    """

    k: int = 5
    seed: int = 0
    task: str = "event"
    n_clusters: int = 5
    samples_per_cluster: int = 2000
    refine_rounds: int = 5
    refine_epochs: int = 10
    refine_lr: float = 0.01
    refine_tol: float = 0.01
    refine_batch: int = 2000
    gene_epochs: int = 30
    gene_lr: float = 0.001
    gene_batch: int = 2000
    adversarial: bool = True
    train_epochs: int = 100
    train_lr: float = 0.01
    fine_tune_lr: float = 0.0001
    train_batch: int = 50
    lam1: float = 1.0
    lam2: float = 1.0
    val_frac: float = 0.1
    d_h: int = 32
    width: int = 64
    d_H: int = 128

    def fingerprint(self) -> str:
        return config_fingerprint(dataclasses.asdict(self))


_EPOCH_FIELD = {"assign": "refine_epochs", "train-genes": "gene_epochs",
                "train": "train_epochs"}
_BATCH_FIELD = {"assign": "refine_batch", "train-genes": "gene_batch",
                "train": "train_batch"}


def _load_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except OSError as e:
        raise UsageError(f"cannot read config file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise UsageError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    return raw


def _coerce(name: str, value, want: type):
    if want is bool:
        if isinstance(value, bool):
            return value
    elif want is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif want is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif want is str:
        if isinstance(value, str):
            return value
    raise UsageError(
        f"config key {name!r} needs a {want.__name__}, got {value!r}"
    )


def resolve_config(command: str, args: argparse.Namespace) -> RunConfig:
    """Layer defaults, --config file, then explicit flags."""
    cfg = RunConfig()
    if getattr(args, "config", None):
        overrides = {}
        defaults = dataclasses.asdict(cfg)
        for key, value in _load_config_file(args.config).items():
            if key not in defaults:
                raise UsageError(f"unknown config key {key!r}")
            overrides[key] = _coerce(key, value, type(defaults[key]))
        cfg = dataclasses.replace(cfg, **overrides)

    flag_fields = {"seed": "seed", "task": "task",
                   "samples_per_cluster": "samples_per_cluster"}
    # synth has no gene count, so its --k names the mixture clusters
    flag_fields["k"] = "n_clusters" if command == "synth" else "k"
    if command in _EPOCH_FIELD:
        flag_fields["epochs"] = _EPOCH_FIELD[command]
        flag_fields["batch"] = _BATCH_FIELD[command]
    overrides = {}
    for flag, field in flag_fields.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field] = value
    cfg = dataclasses.replace(cfg, **overrides)

    if cfg.task not in ("value", "event"):
        raise UsageError(f"task must be 'value' or 'event', got {cfg.task!r}")
    for name in ("k", "n_clusters", "samples_per_cluster", "refine_batch",
                 "gene_batch", "train_batch"):
        if getattr(cfg, name) < 1:
            raise UsageError(f"{name} must be >= 1, got {getattr(cfg, name)}")
    for name in ("refine_epochs", "gene_epochs", "train_epochs",
                 "refine_rounds"):
        if getattr(cfg, name) < 0:
            raise UsageError(f"{name} must be >= 0, got {getattr(cfg, name)}")
    return cfg


# ------------------------------------------------------------- checkpoints

def _stub_dataset(meta_cfg: dict) -> SeriesDataset:
    """One zero sample carrying the dims a checkpoint records.

    Model constructors only read meta dims and moment buffers from the
    dataset, and the buffers are overwritten by the restore that
    follows, so a placeholder sample is enough to rebuild the stack.
    """
    meta = DatasetMeta(
        W=int(meta_cfg["W"]),
        T=int(meta_cfg["T"]),
        S=int(meta_cfg["S"]),
        classes=tuple(int(c) for c in meta_cfg.get("classes", [])),
    )
    label = meta.classes[0] if meta.classes else None
    return SeriesDataset(
        [Sample(id="stub", windows=np.zeros((meta.W, meta.T, meta.S)),
                label=label)],
        meta,
    )


def _meta_dict(meta: DatasetMeta) -> dict:
    return {"W": meta.W, "T": meta.T, "S": meta.S,
            "classes": list(meta.classes)}


def load_stack(path: str, kinds: tuple):
    """Rebuild (classifier, genes, predictor-or-None, config) from a file."""
    stores, cfg = load_checkpoint(path)
    kind = cfg.get("kind")
    if kind not in kinds:
        raise DataError(
            f"checkpoint {path} holds a {kind!r} model, expected "
            f"{' or '.join(kinds)}"
        )
    try:
        stub = _stub_dataset(cfg["meta"])
        k = int(cfg["k"])
        clf = new_classifier(stub, k, seed=0, hidden=int(cfg["hidden"]))
        genes = new_gene_model(stub, k, seed=0, d_h=int(cfg["d_h"]),
                               width=int(cfg["width"]))
    except KeyError as e:
        raise DataError(f"checkpoint {path} is missing config key {e}") from e
    for name, store in (("classifier", clf.params), ("enc", genes.enc),
                        ("gen", genes.gen), ("disc", genes.disc)):
        if name not in stores:
            raise DataError(f"checkpoint {path} has no {name!r} store")
        restore_store(store, stores[name])
    predictor = None
    if kind == "predictor":
        try:
            predictor = new_predictor(stub, clf, genes, cfg["task"], seed=0,
                                      d_H=int(cfg["d_H"]))
        except KeyError as e:
            raise DataError(
                f"checkpoint {path} is missing config key {e}"
            ) from e
        if "predictor" not in stores:
            raise DataError(f"checkpoint {path} has no 'predictor' store")
        restore_store(predictor.params, stores["predictor"])
    return clf, genes, predictor, cfg


def _check_dims(ds: SeriesDataset, genes: GeneModel, path: str):
    if (ds.meta.T, ds.meta.S) != (genes.T, genes.S):
        raise DataError(
            f"dataset windows are {ds.meta.T}x{ds.meta.S} but checkpoint "
            f"{path} was trained on {genes.T}x{genes.S}"
        )


def _write_text(path: str, text: str):
    fd, tmp = tempfile.mkstemp(
        dir=os.path.dirname(os.path.abspath(path)) or ".", suffix=".tmp"
    )
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------- commands

def _cmd_synth(cfg: RunConfig, args) -> int:
    ds, _ = generate_synthetic(
        n_clusters=cfg.n_clusters,
        samples_per_cluster=cfg.samples_per_cluster,
        seed=cfg.seed,
        with_next=True,
    )
    save_dataset(ds, args.out)
    m = ds.meta
    print(f"wrote {len(ds)} samples (W={m.W} T={m.T} S={m.S}) to {args.out}")
    return 0


def _refine(ds: SeriesDataset, cfg: RunConfig):
    return recognition_refine(
        ds, cfg.k, cfg.seed,
        max_outer=cfg.refine_rounds,
        epochs_per_round=cfg.refine_epochs,
        lr=cfg.refine_lr,
        tol=cfg.refine_tol,
        batch_size=cfg.refine_batch,
    )


def _cmd_assign(cfg: RunConfig, args) -> int:
    ds = load_dataset(args.data)
    res = _refine(ds, cfg)
    if args.out:
        save_assignment_csv(ds, res.assignment, args.out)
        print(f"wrote assignment to {args.out}")

    assigned = res.assignment.flat_hard()
    labels = ds.labels()
    if labels is not None:
        truth = np.repeat(labels, ds.meta.W)
        rep = clustering_metrics(truth, assigned,
                                 features=window_features(ds))
    else:
        rep = MetricReport(
            task="assignment",
            metrics={"silhouette": silhouette(window_features(ds), assigned)},
            flags=["no_labels_for_homogeneity"],
        )
    rep.seed = cfg.seed
    rep.fingerprint = cfg.fingerprint()
    for name, value in sorted(rep.metrics.items()):
        print(f"{name} {value:.4f}")
    if args.report:
        _write_text(args.report, rep.to_json() + "\n")
        print(f"wrote report to {args.report}")
    return 0


def _cmd_train_genes(cfg: RunConfig, args) -> int:
    ds = load_dataset(args.data)
    res = _refine(ds, cfg)
    genes, traces = train_genes(
        ds, res.assignment, cfg.k, cfg.seed,
        epochs=cfg.gene_epochs,
        lr=cfg.gene_lr,
        batch_size=cfg.gene_batch,
        adversarial=cfg.adversarial,
        d_h=cfg.d_h,
        width=cfg.width,
    )
    stores = {"classifier": res.classifier.params, "enc": genes.enc,
              "gen": genes.gen, "disc": genes.disc}
    ckpt_cfg = {
        "kind": "genes",
        "meta": _meta_dict(ds.meta),
        "k": cfg.k,
        "hidden": res.classifier.hidden,
        "d_h": cfg.d_h,
        "width": cfg.width,
        "run": dataclasses.asdict(cfg),
    }
    save_checkpoint(stores, ckpt_cfg, args.checkpoint)
    if traces:
        last = traces[-1]
        print(
            f"final epoch: d_loss {last['d_loss']:.4f} kl {last['kl']:.4f} "
            f"fit {last['fit']:.4f}"
        )
    print(f"wrote checkpoint to {args.checkpoint}")
    return 0


def _cmd_train(cfg: RunConfig, args) -> int:
    ds = load_dataset(args.data)
    clf, genes, _, _ = load_stack(args.checkpoint, ("genes", "predictor"))
    _check_dims(ds, genes, args.checkpoint)
    model, trace = train_end_to_end(
        ds, clf, genes, cfg.task, cfg.seed,
        epochs=cfg.train_epochs,
        lr=cfg.train_lr,
        fine_tune_lr=cfg.fine_tune_lr,
        batch_size=cfg.train_batch,
        lam1=cfg.lam1,
        lam2=cfg.lam2,
        val_frac=cfg.val_frac,
        d_H=cfg.d_H,
    )
    stores = {"classifier": clf.params, "enc": genes.enc, "gen": genes.gen,
              "disc": genes.disc, "predictor": model.params}
    ckpt_cfg = {
        "kind": "predictor",
        "meta": _meta_dict(ds.meta),
        "k": genes.K,
        "hidden": clf.hidden,
        "d_h": genes.d_h,
        "width": genes.width,
        "task": cfg.task,
        "d_H": cfg.d_H,
        "run": dataclasses.asdict(cfg),
    }
    save_checkpoint(stores, ckpt_cfg, args.out)
    if trace:
        last = trace[-1]
        print(f"final epoch: total {last['total']:.4f} app {last['app']:.4f}")
    print(f"wrote checkpoint to {args.out}")
    return 0


def _cmd_predict(cfg: RunConfig, args) -> int:
    ds = load_dataset(args.data)
    _, genes, model, _ = load_stack(args.checkpoint, ("predictor",))
    _check_dims(ds, genes, args.checkpoint)
    outs = []
    windows = ds.stacked()
    for start in range(0, len(ds), 512):
        outs.append(predict_batch(model, windows[start:start + 512]))
    out = np.concatenate(outs)
    ids = [s.id for s in ds.samples]
    if model.task == "value":
        save_predictions(args.out, ids, values=out)
    else:
        save_predictions(args.out, ids, probs=out)
    print(f"wrote {len(ids)} {model.task} predictions to {args.out}")
    return 0


def _load_predictions(path: str) -> dict:
    if not os.path.exists(path):
        raise DataError(f"prediction file not found: {path}")
    rows = {}
    with open(path, "r", encoding="utf-8") as f:
        for i, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(
                    f"{path} line {i}: malformed JSON ({e.msg})"
                ) from None
            if "id" not in rec:
                raise DataError(f"{path} line {i}: prediction without an id")
            rows[str(rec["id"])] = rec
    if not rows:
        raise DataError(f"empty prediction file: {path}")
    return rows


def _event_pred(rec: dict, sid: str) -> int:
    if rec.get("pred_class") is not None:
        return int(rec["pred_class"])
    if rec.get("probs"):
        return int(np.argmax(rec["probs"]))
    raise DataError(f"no event prediction for sample {sid!r}")


def _event_report(truth: np.ndarray, pred: np.ndarray) -> MetricReport:
    """Accuracy plus class-averaged F-scores, on the 0..100 scale."""
    classes = sorted(set(np.unique(truth).tolist())
                     | set(np.unique(pred).tolist()))
    per_class = {}
    f1s, f05s = [], []
    for c in classes:
        rep = fbeta_metrics(truth, pred, positive=c)
        f1s.append(rep.metrics["f1"])
        f05s.append(rep.metrics["f0.5"])
        per_class[str(c)] = {
            "precision": 100.0 * rep.metrics["precision"],
            "recall": 100.0 * rep.metrics["recall"],
            "f1": 100.0 * rep.metrics["f1"],
        }
    metrics = {
        "accuracy": 100.0 * float(np.mean(truth == pred)),
        "f1": 100.0 * float(np.mean(f1s)),
        "f0.5": 100.0 * float(np.mean(f05s)),
    }
    return MetricReport(task="event", metrics=metrics, per_class=per_class)


def _cmd_eval(cfg: RunConfig, args) -> int:
    ds = load_dataset(args.data)
    preds = _load_predictions(args.pred)
    ids = [s.id for s in ds.samples]
    missing = [sid for sid in ids if sid not in preds]
    if missing:
        raise DataError(
            f"{len(missing)} dataset ids have no prediction, "
            f"first missing: {missing[0]!r}"
        )

    if cfg.task == "event":
        truth = ds.labels()
        if truth is None:
            raise DataError("dataset has no labels to evaluate against")
        pred = np.array([_event_pred(preds[sid], sid) for sid in ids])
        rep = _event_report(truth, pred)
    else:
        nexts = ds.next_windows()
        if nexts is None:
            raise DataError("dataset has no next windows to evaluate against")
        shape = (ds.meta.T, ds.meta.S)
        vals = []
        for sid in ids:
            v = preds[sid].get("pred_value")
            if v is None:
                raise DataError(f"no value prediction for sample {sid!r}")
            arr = np.asarray(v, dtype=np.float64)
            if arr.size != shape[0] * shape[1]:
                raise DataError(
                    f"sample {sid!r}: predicted {arr.size} values, "
                    f"expected {shape[0] * shape[1]}"
                )
            vals.append(arr.reshape(shape))
        value, excluded = mape(nexts, np.stack(vals))
        rep = MetricReport(
            task="value",
            metrics={"mape": value, "mape_excluded": float(excluded)},
        )

    rep.seed = cfg.seed
    rep.fingerprint = cfg.fingerprint()
    for name, value in sorted(rep.metrics.items()):
        print(f"{name} {value:.2f}")
    if args.report:
        _write_text(args.report, rep.to_json() + "\n")
        print(f"wrote report to {args.report}")
    return 0


def _cmd_export_dist(cfg: RunConfig, args) -> int:
    ds = load_dataset(args.data)
    clf, genes, _, _ = load_stack(args.checkpoint, ("genes", "predictor"))
    _check_dims(ds, genes, args.checkpoint)
    probs = classifier_apply(clf, ds.segments())
    assignment = GeneAssignment(probs.reshape(len(ds), ds.meta.W, -1))
    export_distribution(ds, assignment, genes, args.out, seed=cfg.seed)
    print(f"wrote distribution export to {args.out}")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "assign": _cmd_assign,
    "train-genes": _cmd_train_genes,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "eval": _cmd_eval,
    "export-dist": _cmd_export_dist,
}


# ----------------------------------------------------------------- parsing

def _add_common(sp, *flags, required=()):
    sp.add_argument("--config", help="JSON file of config overrides")
    sp.add_argument("--seed", type=int, help="random seed")
    for flag in flags:
        req = flag in required
        if flag == "data":
            sp.add_argument("--data", required=req, help="dataset JSONL file")
        elif flag == "out":
            sp.add_argument("--out", required=req, help="output file")
        elif flag == "k":
            sp.add_argument("--k", type=int, help="number of genes")
        elif flag == "epochs":
            sp.add_argument("--epochs", type=int, help="training epochs")
        elif flag == "batch":
            sp.add_argument("--batch", type=int, dest="batch",
                            help="batch size")
        elif flag == "task":
            sp.add_argument("--task", choices=("value", "event"),
                            help="prediction task")
        elif flag == "checkpoint":
            sp.add_argument("--checkpoint", required=req,
                            help="checkpoint file")
        elif flag == "report":
            sp.add_argument("--report", help="metric report JSON file")
        elif flag == "pred":
            sp.add_argument("--pred", required=req,
                            help="prediction JSONL file")


def build_parser() -> _Parser:
    p = _Parser(prog="evogene",
                description="evolution-gene time series modeling")
    sub = p.add_subparsers(dest="command", metavar="command",
                           parser_class=_Parser)

    sp = sub.add_parser("synth", help="write a synthetic benchmark dataset")
    _add_common(sp, "out", "k", required=("out",))
    sp.add_argument("--samples-per-cluster", type=int,
                    dest="samples_per_cluster",
                    help="samples drawn per mixture cluster")

    sp = sub.add_parser("assign",
                        help="refine gene assignment and report quality")
    _add_common(sp, "data", "k", "epochs", "batch", "out", "report",
                required=("data",))

    sp = sub.add_parser("train-genes",
                        help="refine assignment and train the gene model")
    _add_common(sp, "data", "k", "epochs", "batch", "checkpoint",
                required=("data", "checkpoint"))

    sp = sub.add_parser("train",
                        help="train the predictor on a pretrained gene stack")
    _add_common(sp, "data", "checkpoint", "out", "task", "epochs", "batch",
                required=("data", "checkpoint", "out"))

    sp = sub.add_parser("predict", help="write predictions for a dataset")
    _add_common(sp, "data", "checkpoint", "out",
                required=("data", "checkpoint", "out"))

    sp = sub.add_parser("eval", help="score predictions against a dataset")
    _add_common(sp, "pred", "data", "task", "report",
                required=("pred", "data"))

    sp = sub.add_parser("export-dist",
                        help="export real vs generated value distributions")
    _add_common(sp, "data", "checkpoint", "out",
                required=("data", "checkpoint", "out"))
    return p


def run(argv=None) -> int:
    """Parse argv, run one subcommand, map failures to exit codes."""
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 1
        cfg = resolve_config(args.command, args)
        print(f"config {cfg.fingerprint()}")
        return _COMMANDS[args.command](cfg, args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except (DataError, DimensionError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 3
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 0


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
