"""One-vs-rest multiclass SVM on precomputed quantum kernels.

Each binary dual

    min_a  1/2 sum_ij a_i a_j y_i y_j K_ij - sum_i a_i
    s.t.   sum_i a_i y_i = 0,  0 <= a_i <= C

is solved by two-variable analytic updates on the maximal violating pair.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .featuremap import check_variant
from .noise import resolve_backend
from .preprocessing import Standardizer
from .qkernel import KernelMatrix, cross_kernel, gram_matrix, psd_project

SCHEMA_VERSION = 1


class DegenerateLabelsError(ValueError):
    pass


class ClassCoverageError(ValueError):
    pass


class IndefiniteKernelWarning(UserWarning):
    pass


@dataclass
class BinaryDual:
    alphas: np.ndarray
    bias: float
    labels: np.ndarray
    kkt_violation: float = 0.0
    iterations: int = 0
    converged: bool = True

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.alphas > 0)


def _kernel_array(K) -> np.ndarray:
    A = K.entries if isinstance(K, KernelMatrix) else K
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"kernel matrix must be square, got shape {A.shape}")
    return A


def dual_objective(alphas, K, y) -> float:
    """Dual value to be maximized: ``sum(a) - 1/2 (a*y)^T K (a*y)``."""
    ay = np.asarray(alphas) * np.asarray(y)
    return float(np.sum(alphas) - 0.5 * ay @ _kernel_array(K) @ ay)


def train_binary(K, y, C: float = 1.0, tol: float = 1e-5, max_iter: int = 1_000_000) -> BinaryDual:
    A = _kernel_array(K)
    y = np.asarray(y, dtype=float)
    d = len(y)
    if A.shape[0] != d:
        raise ValueError(f"kernel is {A.shape[0]}x{A.shape[0]} but {d} labels were given")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be +1 or -1")
    if np.all(y == y[0]):
        raise DegenerateLabelsError("both classes must be present")
    if not C > 0:
        raise ValueError(f"C must be positive, got {C}")

    alpha = np.zeros(d)
    grad = -np.ones(d)  # gradient of the minimization objective, Q a - e
    pos = y > 0
    diag = np.diag(A)
    gap = np.inf
    it = 0
    while it < max_iter:
        v = -y * grad
        at_upper = alpha >= C
        at_lower = alpha <= 0
        up = np.where(pos, ~at_upper, ~at_lower)
        low = np.where(pos, ~at_lower, ~at_upper)
        v_up = np.where(up, v, -np.inf)
        v_low = np.where(low, v, np.inf)
        i = int(np.argmax(v_up))
        j = int(np.argmin(v_low))
        gap = v_up[i] - v_low[j]
        if gap < tol:
            break
        # move a_i by +y_i t and a_j by -y_j t
        curv = diag[i] + diag[j] - 2 * A[i, j]
        t = gap / (curv if curv > 1e-12 else 1e-12)
        t = min(t, C - alpha[i] if pos[i] else alpha[i])
        t = min(t, alpha[j] if pos[j] else C - alpha[j])
        da_i, da_j = y[i] * t, -y[j] * t
        alpha[i] = min(C, max(0.0, alpha[i] + da_i))
        alpha[j] = min(C, max(0.0, alpha[j] + da_j))
        # Q[:, k] = y * y_k * K[:, k]
        grad += y * (A[:, i] * (y[i] * da_i) + A[:, j] * (y[j] * da_j))
        it += 1

    converged = gap < tol
    if not converged:
        warnings.warn(
            f"dual solver hit the {max_iter}-update cap; KKT violation {gap:.3e}",
            ConvergenceWarning,
        )
    return BinaryDual(alpha, _bias(alpha, grad, y, C), y.copy(), float(gap), it, converged)


def _bias(alpha, grad, y, C) -> float:
    yg = y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(-yg[free].mean())
    pos = y > 0
    at_upper = alpha >= C
    # upper/lower bounds on rho from bound variables
    ub_mask = np.where(pos, ~at_upper, at_upper)
    lb_mask = ~ub_mask
    ub = yg[ub_mask].min() if ub_mask.any() else np.inf
    lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
    if np.isinf(ub) or np.isinf(lb):
        rho = lb if np.isinf(ub) else ub
    else:
        rho = (ub + lb) / 2
    return float(-rho)


@dataclass
class SvmModel:
    k: int
    duals: list
    C: float
    variant: str
    backend: str | None
    standardizer: Standardizer | None
    training_inputs: np.ndarray
    classes: np.ndarray = field(default=None)

    def __post_init__(self):
        if len(self.duals) != self.k:
            raise ValueError(f"expected {self.k} duals, got {len(self.duals)}")
        if self.classes is None:
            self.classes = np.arange(self.k)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "variant": self.variant,
            "backend": self.backend or "none",
            "C": self.C,
            "standardizer": self.standardizer.to_dict() if self.standardizer else None,
            "classes": np.asarray(self.classes).tolist(),
            "per_class": [
                {"alphas": d.alphas.tolist(), "labels": d.labels.astype(int).tolist(), "bias": d.bias}
                for d in self.duals
            ],
            "training_inputs": self.training_inputs.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SvmModel":
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {doc.get('schema_version')!r}")
        duals = [
            BinaryDual(np.asarray(p["alphas"], dtype=float), float(p["bias"]),
                       np.asarray(p["labels"], dtype=float))
            for p in doc["per_class"]
        ]
        std = doc.get("standardizer")
        backend = doc["backend"]
        return cls(
            k=len(duals), duals=duals, C=float(doc["C"]), variant=check_variant(doc["variant"]),
            backend=None if backend == "none" else backend,
            standardizer=Standardizer.from_dict(std) if std else None,
            training_inputs=np.asarray(doc["training_inputs"], dtype=float),
            classes=np.asarray(doc["classes"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "SvmModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def train_ovr(K, labels, C: float = 1.0, k: int | None = None, **solver_kw) -> list:
    """One binary dual per class; class ``s`` gets +1, the rest -1."""
    labels = np.asarray(labels, dtype=int)
    k = int(labels.max()) + 1 if k is None else k
    if k < 2:
        raise ClassCoverageError("one-vs-rest needs at least two classes")
    missing = sorted(set(range(k)) - set(labels.tolist()))
    if missing:
        raise ClassCoverageError(f"classes {missing} have no training samples")
    A = _kernel_array(K)
    if np.linalg.eigvalsh(A).min() < -1e-8:
        warnings.warn(
            "kernel matrix is indefinite; the dual is non-convex and the solution heuristic",
            IndefiniteKernelWarning,
        )
    return [train_binary(A, np.where(labels == s, 1.0, -1.0), C, **solver_kw) for s in range(k)]


def scores_from_kernel(duals, K_cross) -> np.ndarray:
    """Decision scores, shape ``(n_points, k)``, from ``K_cross[p, i] = k(x_i, p)``."""
    K_cross = np.atleast_2d(K_cross)
    coef = np.stack([d.alphas * d.labels for d in duals], axis=1)
    bias = np.array([d.bias for d in duals])
    return K_cross @ coef + bias


def decision_scores(model: SvmModel, p) -> np.ndarray:
    """Scores of raw (unstandardized) points ``p``; 1-D input gives a length-k vector."""
    P = np.asarray(p, dtype=float)
    single = P.ndim == 1
    P = np.atleast_2d(P)
    if P.shape[1] != model.training_inputs.shape[1]:
        raise ValueError(
            f"points have {P.shape[1]} features, model expects {model.training_inputs.shape[1]}"
        )
    if model.standardizer is not None:
        P = model.standardizer.transform(P)
    Kc = cross_kernel(model.variant, model.training_inputs, P, model.backend)
    s = scores_from_kernel(model.duals, Kc)
    return s[0] if single else s


def argmax_lowest(scores) -> np.ndarray:
    """Row-wise argmax; exact ties go to the lowest index."""
    return np.argmax(np.asarray(scores), axis=-1)


def predict(model: SvmModel, p):
    ids = argmax_lowest(decision_scores(model, p))
    return model.classes[ids]


class QuantumKernelSVC(ClassifierMixin, BaseEstimator):
    """One-vs-rest SVM over a fidelity quantum kernel.

    Parameters
    ----------
    variant : str
        Encoding, one of ``AnRx, AnRy, AnRz, IQPl, IQPc, IQPf``.
    C : float
        Box constraint of every binary dual.
    backend : str or NoiseBackend, optional
        Noise backend for kernel evaluation (training and inference).
    psd_repair : bool
        Project noisy Gram matrices onto the PSD cone before training.
    standardize : bool
        Fit a zero-mean/unit-variance standardizer on the training inputs.
    """

    def __init__(self, variant="AnRx", C=1.0, backend=None, psd_repair=True,
                 standardize=True, tol=1e-5, max_iter=1_000_000):
        self.variant = variant
        self.C = C
        self.backend = backend
        self.psd_repair = psd_repair
        self.standardize = standardize
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        check_classification_targets(y)
        check_variant(self.variant)
        self.classes_, ids = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ClassCoverageError("need at least two classes")
        backend = resolve_backend(self.backend)
        std = Standardizer().fit(X) if self.standardize else None
        Xs = std.transform(X) if std else X
        K = gram_matrix(self.variant, Xs, backend)
        # raw entries match what inference sees through cross_kernel
        self.train_kernel_ = K.entries
        if backend is not None and self.psd_repair:
            K = psd_project(K)
        self.kernel_repair_delta_ = K.repair_delta
        duals = train_ovr(K, ids, self.C, k=len(self.classes_), tol=self.tol, max_iter=self.max_iter)
        self.model_ = SvmModel(
            len(self.classes_), duals, float(self.C), self.variant,
            backend.name if backend else None, std, Xs, self.classes_,
        )
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=float)
        return decision_scores(self.model_, X)

    def predict(self, X):
        return self.classes_[argmax_lowest(self.decision_function(X))]

    def train_predictions(self):
        """Predictions on the training inputs reusing the stored training Gram matrix."""
        check_is_fitted(self, "model_")
        return self.classes_[argmax_lowest(scores_from_kernel(self.model_.duals, self.train_kernel_))]

    @classmethod
    def from_model(cls, model: SvmModel) -> "QuantumKernelSVC":
        est = cls(variant=model.variant, C=model.C, backend=model.backend,
                  standardize=model.standardizer is not None)
        est.model_ = model
        est.classes_ = np.asarray(model.classes)
        est.n_features_in_ = model.training_inputs.shape[1]
        return est
