"""Splits, k-fold folding, confusion matrices and exact precision/recall/F1 reports."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from sklearn.model_selection import KFold, StratifiedKFold


class SplitError(ValueError):
    pass


class ZeroSupportWarning(UserWarning):
    pass


def _sklearn_seed(seed: int) -> int:
    # sklearn wants a 32-bit seed; fold the full u64 through SeedSequence
    return int(np.random.SeedSequence(int(seed)).generate_state(1)[0])


def split(y, test_ratio: float = 0.3, seed: int = 0, stratify: bool = True):
    """Row indices ``(train, test)``, both sorted.

    Stratified mode holds out ``round(test_ratio * n_c)`` rows of each class
    ``c``; otherwise ``round(test_ratio * n)`` rows are drawn from the pool.
    """
    y = np.asarray(y)
    n = len(y)
    if n < 10:
        raise SplitError(f"need at least 10 rows to split, got {n}")
    if not 0 < test_ratio < 1:
        raise SplitError(f"test ratio must lie in (0, 1), got {test_ratio}")
    rng = np.random.default_rng(int(seed))
    if not stratify:
        perm = rng.permutation(n)
        n_test = int(round(test_ratio * n))
        return np.sort(perm[n_test:]), np.sort(perm[:n_test])
    test = []
    for c in np.unique(y):
        rows = np.flatnonzero(y == c)
        if len(rows) < 2:
            raise SplitError(f"class {c!r} has {len(rows)} row(s); stratified split needs 2")
        n_test = min(max(int(round(test_ratio * len(rows))), 1), len(rows) - 1)
        test.append(rng.permutation(rows)[:n_test])
    test = np.sort(np.concatenate(test))
    train = np.setdiff1d(np.arange(n), test)
    return train, test


def kfold(y, k: int = 5, seed: int = 0, stratify: bool = True) -> list:
    """``k`` disjoint, exhaustive ``(train, test)`` index pairs."""
    y = np.asarray(y)
    if k < 2:
        raise SplitError(f"k must be at least 2, got {k}")
    if stratify:
        _, counts = np.unique(y, return_counts=True)
        if counts.min() < k:
            raise SplitError(f"smallest class has {counts.min()} rows, fewer than k={k}")
        folder = StratifiedKFold(k, shuffle=True, random_state=_sklearn_seed(seed))
    else:
        if len(y) < k:
            raise SplitError(f"{len(y)} rows cannot fill {k} folds")
        folder = KFold(k, shuffle=True, random_state=_sklearn_seed(seed))
    return [(np.sort(tr), np.sort(te)) for tr, te in folder.split(np.zeros(len(y)), y)]


def mean_accuracy(fit_predict, X, y, folds) -> tuple:
    """Per-fold accuracies and their mean; ``fit_predict(X_tr, y_tr, X_te)`` returns labels."""
    X, y = np.asarray(X), np.asarray(y)
    accs = []
    for tr, te in folds:
        pred = np.asarray(fit_predict(X[tr], y[tr], X[te]))
        accs.append(float(np.mean(pred == y[te])))
    return accs, float(np.mean(accs))


def confusion_matrix(y_true, y_pred, k: int | None = None) -> np.ndarray:
    """Counts with rows = true class, columns = predicted class."""
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValueError(f"label arrays differ in shape: {y_true.shape} vs {y_pred.shape}")
    if k is None:
        k = int(max(y_true.max(initial=-1), y_pred.max(initial=-1))) + 1
    if y_true.size and (min(y_true.min(), y_pred.min()) < 0 or max(y_true.max(), y_pred.max()) >= k):
        raise ValueError(f"labels must lie in [0, {k})")
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def _ratio(num: int, den: int) -> Fraction:
    return Fraction(num, den) if den else Fraction(0)


def _f1(p: Fraction, r: Fraction) -> Fraction:
    return 2 * p * r / (p + r) if p + r else Fraction(0)


@dataclass
class MetricsReport:
    """Exact metrics; every value is a ``Fraction`` until exported."""

    accuracy: Fraction
    precision: list
    recall: list
    f1: list
    support: list
    macro: dict
    micro: dict
    weighted: dict

    def as_dict(self) -> dict:
        f = float
        return {
            "accuracy": f(self.accuracy),
            "per_class": [
                {"class": c, "precision": f(p), "recall": f(r), "f1": f(s), "support": int(n)}
                for c, (p, r, s, n) in enumerate(zip(self.precision, self.recall, self.f1, self.support))
            ],
            "Macroaverage": {k.capitalize(): f(v) for k, v in self.macro.items()},
            "Microaverage": {k.capitalize(): f(v) for k, v in self.micro.items()},
            "Weighted average": {k.capitalize(): f(v) for k, v in self.weighted.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=1, sort_keys=True) + "\n"


def metrics_report(cm) -> MetricsReport:
    cm = np.asarray(cm, dtype=np.int64)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ValueError(f"confusion matrix must be square, got shape {cm.shape}")
    k = cm.shape[0]
    total = int(cm.sum())
    if total == 0:
        raise ValueError("confusion matrix is empty")
    tp = [int(cm[c, c]) for c in range(k)]
    support = [int(v) for v in cm.sum(axis=1)]
    predicted = [int(v) for v in cm.sum(axis=0)]
    for c in range(k):
        if support[c] == 0:
            warnings.warn(f"class {c} has no true samples; its recall is defined as 0",
                          ZeroSupportWarning)
        if predicted[c] == 0:
            warnings.warn(f"class {c} was never predicted; its precision is defined as 0",
                          ZeroSupportWarning)
    prec = [_ratio(tp[c], predicted[c]) for c in range(k)]
    rec = [_ratio(tp[c], support[c]) for c in range(k)]
    f1 = [_f1(p, r) for p, r in zip(prec, rec)]

    macro = {"precision": sum(prec) / k, "recall": sum(rec) / k, "f1": sum(f1) / k}
    # pooled counts: every error is one FP and one FN, so P = R = accuracy
    mp = Fraction(sum(tp), sum(predicted))
    mr = Fraction(sum(tp), sum(support))
    micro = {"precision": mp, "recall": mr, "f1": _f1(mp, mr)}
    weighted = {
        name: sum(Fraction(support[c]) * vals[c] for c in range(k)) / total
        for name, vals in (("precision", prec), ("recall", rec), ("f1", f1))
    }
    return MetricsReport(Fraction(sum(tp), total), prec, rec, f1, support, macro, micro, weighted)


def evaluate(y_true, y_pred, k: int | None = None) -> MetricsReport:
    return metrics_report(confusion_matrix(y_true, y_pred, k))


def format_table(rows: dict, digits: int = 4) -> str:
    """Aligned text table; ``rows`` maps a row label to a ``MetricsReport``."""
    head = ["Model", "Accuracy"] + [
        f"{agg} {m}" for agg in ("Macro", "Micro", "Weighted") for m in ("P", "R", "F1")
    ]
    body = []
    for label, rep in rows.items():
        vals = [rep.accuracy]
        for agg in (rep.macro, rep.micro, rep.weighted):
            vals += [agg["precision"], agg["recall"], agg["f1"]]
        body.append([str(label)] + [f"{float(v):.{digits}f}" for v in vals])
    widths = [max(len(r[i]) for r in [head] + body) for i in range(len(head))]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
             for r in [head] + body]
    return "\n".join(lines) + "\n"
