"""Command-line driver: ``qkdqml {gen,train,eval,bench-noise,kernel-dump}``.

Exit codes: 0 success, 1 runtime or convergence failure, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np
from sklearn.exceptions import ConvergenceWarning

from . import evalkit
from .config import ConfigError, ExperimentConfig, load_config, validate
from .featuremap import VARIANTS
from .mcsvm import QuantumKernelSVC, SvmModel
from .noise import NoiseModelError, load_backend, resolve_backend
from .qkdgen import Dataset, ScenarioError, generate_dataset
from .qkernel import gram_matrix
from .qnn import QNNClassifier, QnnModel, TrainingAborted


class RunFailure(RuntimeError):
    """Runtime failure mapped to exit code 1."""


def _dump(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def manifest(cfg: ExperimentConfig, command: str, **extra) -> dict:
    return dict(extra, command=command, config_sha256=cfg.digest(), seed=int(cfg.seed))


def backend_for(cfg: ExperimentConfig, name: str | None = None):
    if name is None and cfg.backend_file:
        return load_backend(cfg.backend_file)
    return resolve_backend(cfg.backend if name is None else name)


def build_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.dataset.path:
        return Dataset.read_csv(cfg.dataset.path)
    d = cfg.dataset
    return generate_dataset(d.link, cfg.scenario_objects(), d.blocks_per_class, d.block_size, cfg.seed)


def holdout(cfg: ExperimentConfig, ds: Dataset):
    return evalkit.split(ds.y, cfg.split.test_ratio, cfg.seed, cfg.split.stratify)


def make_estimator(cfg: ExperimentConfig, backend=None):
    m = cfg.model
    if m.family == "qsvm":
        return QuantumKernelSVC(m.variant, C=m.C, backend=backend, psd_repair=m.psd_repair)
    return QNNClassifier(
        m.variant, n_layers=m.n_layers, initial_lr=m.initial_lr, batch_size=m.batch_size,
        max_epochs=m.max_epochs, early_stop_patience=m.early_stop_patience,
        lr_patience=m.lr_patience, lr_factor=m.lr_factor, min_lr=m.min_lr, seed=cfg.seed,
    )


def _fit(est, X_tr, y_tr, X_te, y_te):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        try:
            if isinstance(est, QNNClassifier):
                est.fit(X_tr, y_tr, X_te, y_te)
            else:
                est.fit(X_tr, y_tr)
        except TrainingAborted as exc:
            raise RunFailure(f"training aborted: {exc}") from None
    for w in caught:
        if issubclass(w.category, ConvergenceWarning):
            raise RunFailure(f"solver did not converge: {w.message}")
        warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    return est


def _train_accuracy(est, X_tr, y_tr) -> float:
    pred = est.train_predictions() if isinstance(est, QuantumKernelSVC) else est.predict(X_tr)
    return float(np.mean(pred == y_tr))


def run_holdout(cfg: ExperimentConfig, ds: Dataset, backend=None) -> dict:
    """Train on the 70:30 training split, evaluate on the test split."""
    tr, te = holdout(cfg, ds)
    est = _fit(make_estimator(cfg, backend), ds.X[tr], ds.y[tr], ds.X[te], ds.y[te])
    pred = est.predict(ds.X[te])
    report = evalkit.evaluate(ds.y[te], pred, k=len(ds.class_names))
    return {
        "estimator": est,
        "train_accuracy": _train_accuracy(est, ds.X[tr], ds.y[tr]),
        "test_accuracy": float(report.accuracy),
        "report": report,
        "confusion": evalkit.confusion_matrix(ds.y[te], pred, len(ds.class_names)),
    }


def run_kfold(cfg: ExperimentConfig, ds: Dataset, backend=None) -> dict:
    folds = evalkit.kfold(ds.y, cfg.split.k, cfg.seed, cfg.split.stratify)

    def fit_predict(X_tr, y_tr, X_te):
        return _fit(make_estimator(cfg, backend), X_tr, y_tr, None, None).predict(X_te)

    accs, mean = evalkit.mean_accuracy(fit_predict, ds.X, ds.y, folds)
    return {"fold_accuracies": accs, "mean_accuracy": mean}


# -- commands ---------------------------------------------------------------


def cmd_gen(cfg: ExperimentConfig, out: Path) -> int:
    ds = build_dataset(cfg)
    ds.manifest.update(manifest(cfg, "gen"))
    ds.write(out / "dataset.csv")
    counts = np.bincount(ds.y, minlength=len(ds.class_names))
    for name, c in zip(ds.class_names, counts):
        print(f"{name}\t{c}")
    print(f"total\t{len(ds)}\t-> {out / 'dataset.csv'}")
    return 0


def cmd_train(cfg: ExperimentConfig, out: Path) -> int:
    ds = build_dataset(cfg)
    backend = backend_for(cfg)
    if cfg.model.family == "qnn" and backend is not None:
        raise ConfigError("[backend] name: QNN training is noiseless only")
    if cfg.split.mode == "kfold":
        res = run_kfold(cfg, ds, backend)
        _dump(out / "metrics.json", dict(res, manifest=manifest(cfg, "train")))
        print(f"{cfg.split.k}-fold mean accuracy {res['mean_accuracy']:.4f}")
        return 0
    res = run_holdout(cfg, ds, backend)
    est = res["estimator"]
    est.model_.save(out / "model.json")
    if cfg.model.family == "qnn":
        est.model_.write_log(out / "train_log.csv")
    _dump(out / "metrics.json", {
        "train_accuracy": res["train_accuracy"],
        "test_accuracy": res["test_accuracy"],
        "report": res["report"].as_dict(),
        "confusion_matrix": res["confusion"].tolist(),
        "classes": list(ds.class_names),
        "manifest": manifest(cfg, "train", family=cfg.model.family, variant=cfg.model.variant,
                             backend=backend.name if backend else "none"),
    })
    print(f"{cfg.model.family} {cfg.model.variant} backend={backend.name if backend else 'none'}: "
          f"train {res['train_accuracy']:.4f} test {res['test_accuracy']:.4f}")
    return 0


def _load_model(path: Path):
    doc = json.loads(path.read_text())
    if "per_class" in doc:
        return QuantumKernelSVC.from_model(SvmModel.from_dict(doc))
    return QNNClassifier.from_model(QnnModel.from_dict(doc))


def cmd_eval(cfg: ExperimentConfig, out: Path) -> int:
    """Evaluate ``<out>/model.json`` on the test split of the configured dataset."""
    path = out / "model.json"
    if not path.exists():
        raise ConfigError(f"--out: no model.json in {str(out)!r}; run `train` first")
    est = _load_model(path)
    ds = build_dataset(cfg)
    _, te = holdout(cfg, ds)
    pred = est.predict(ds.X[te])
    report = evalkit.evaluate(ds.y[te], pred, k=len(ds.class_names))
    doc = report.as_dict()
    doc["confusion_matrix"] = evalkit.confusion_matrix(ds.y[te], pred, len(ds.class_names)).tolist()
    doc["manifest"] = manifest(cfg, "eval")
    _dump(out / "report.json", doc)
    table = evalkit.format_table({cfg.model.variant: report})
    (out / "report.txt").write_text(table)
    print(table, end="")
    return 0


def bench_noise(cfg: ExperimentConfig, ds: Dataset, backends, variants) -> list:
    """Retrain and evaluate a QSVM per (variant, backend) cell."""
    rows = []
    for v in variants:
        vcfg = replace(cfg, model=replace(cfg.model, family="qsvm", variant=v))
        for name in backends:
            res = run_holdout(vcfg, ds, resolve_backend(name))
            rows.append({"variant": v, "backend": name, "test_accuracy": res["test_accuracy"],
                         "train_accuracy": res["train_accuracy"], "report": res["report"]})
    return rows


def cmd_bench_noise(cfg: ExperimentConfig, out: Path) -> int:
    ds = build_dataset(cfg)
    rows = bench_noise(cfg, ds, cfg.bench_backends, [cfg.model.variant])
    lines = ["backend,variant,test_accuracy,train_accuracy"]
    lines += [f"{r['backend']},{r['variant']},{r['test_accuracy']!r},{r['train_accuracy']!r}" for r in rows]
    (out / "bench.csv").write_text("\n".join(lines) + "\n")
    _dump(out / "bench.json", {
        "rows": [dict(r, report=r["report"].as_dict()) for r in rows],
        "manifest": manifest(cfg, "bench-noise"),
    })
    table = evalkit.format_table({f"{r['backend']}/{r['variant']}": r["report"] for r in rows})
    (out / "bench.txt").write_text(table)
    print(table, end="")
    return 0


def cmd_kernel_dump(cfg: ExperimentConfig, out: Path) -> int:
    """Write the training-split Gram matrix (standardized inputs) as CSV."""
    ds = build_dataset(cfg)
    tr, _ = holdout(cfg, ds)
    from .preprocessing import Standardizer

    X = Standardizer().fit_transform(ds.X[tr])
    K = gram_matrix(cfg.model.variant, X, backend_for(cfg))
    K.to_csv(out / "kernel.csv")
    _dump(out / "kernel.manifest.json", manifest(cfg, "kernel-dump", variant=cfg.model.variant,
                                                 backend=K.backend or "none", d=K.d))
    print(f"{K.d}x{K.d} kernel -> {out / 'kernel.csv'}")
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "eval": cmd_eval,
    "bench-noise": cmd_bench_noise,
    "kernel-dump": cmd_kernel_dump,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qkdqml", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="experiment config file (INI sections)")
    p.add_argument("--seed", type=int, help="override the dataset/split/init seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--backend", help="none, a preset name, or a key=value backend file")
    p.add_argument("--family", choices=("qsvm", "qnn"))
    return p


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed: must be an unsigned 64-bit integer")
        cfg = replace(cfg, seed=args.seed, dataset=replace(cfg.dataset, seed=args.seed))
    model = cfg.model
    if args.variant:
        model = replace(model, variant=args.variant)
    if args.family:
        model = replace(model, family=args.family)
    cfg = replace(cfg, model=model)
    if args.backend:
        if Path(args.backend).is_file():
            cfg = replace(cfg, backend="file", backend_file=args.backend)
        else:
            cfg = replace(cfg, backend=args.backend, backend_file=None)
    if args.out:
        cfg = replace(cfg, out=args.out)
    validate(cfg)
    return cfg


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        cfg = resolve_config(args)
        if cfg.backend_file is None:
            resolve_backend(cfg.backend)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out)
    except (ConfigError, ScenarioError, NoiseModelError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (RunFailure, ArithmeticError, RuntimeError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
