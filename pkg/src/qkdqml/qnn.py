"""Variational quantum classifier trained with parameter-shift gradients and Adam."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .featuremap import ShapeError, build_encoding_circuit, check_variant
from .preprocessing import Standardizer
from .statesim import Circuit, Gate, expectation_z_batch, run_pure

SCHEMA_VERSION = 1
SHIFT = math.pi / 2


class CapacityError(ValueError):
    pass


class TrainingAborted(RuntimeError):
    pass


@dataclass(frozen=True)
class AnsatzSpec:
    """``n_layers`` blocks of per-qubit U3 rotations followed by a CNOT ring.

    In layer ``l`` (1-based) qubit ``q`` controls a CNOT on ``(q + offset(l)) % n``
    with ``offset(l) = ((l - 1) % (n - 1)) + 1``.
    """

    n: int
    n_layers: int

    @property
    def n_params(self) -> int:
        return 3 * self.n * self.n_layers

    def offset(self, layer: int) -> int:
        return ((layer - 1) % (self.n - 1)) + 1

    def cnot_pairs(self, layer: int) -> list[tuple[int, int]]:
        off = self.offset(layer)
        return [(q, (q + off) % self.n) for q in range(self.n)]

    def circuit(self, params) -> Circuit:
        """Ansatz circuit; ``params`` of shape ``(P,)`` or ``(B, P)``."""
        params = np.asarray(params, dtype=float)
        if params.shape[-1] != self.n_params:
            raise ShapeError(f"expected {self.n_params} parameters, got {params.shape[-1]}")
        theta = params.reshape(params.shape[:-1] + (self.n_layers, self.n, 3))
        c = Circuit(self.n)
        for l in range(self.n_layers):
            for q in range(self.n):
                angles = tuple(theta[..., l, q, a] for a in range(3))
                if params.ndim == 1:
                    angles = tuple(float(a) for a in angles)
                c.add(Gate("U3", (q,), angles))
            for ctrl, tgt in self.cnot_pairs(l + 1):
                c.add(Gate("CNOT", (ctrl, tgt)))
        return c


def build_ansatz(n: int, n_layers: int) -> AnsatzSpec:
    if n < 2:
        raise CapacityError("the ansatz needs at least 2 qubits")
    if n_layers < 1:
        raise ValueError("n_layers must be at least 1")
    return AnsatzSpec(n, n_layers)


def forward_batch(ansatz: AnsatzSpec, variant: str, params, X, k: int) -> np.ndarray:
    """Logits ``<Z_0>..<Z_{k-1}>`` for rows of ``X``; ``params`` is ``(P,)`` or one row per input."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != ansatz.n:
        raise ShapeError(f"inputs have {X.shape[1]} features, ansatz has {ansatz.n} qubits")
    params = np.asarray(params, dtype=float)
    if params.ndim == 1:
        params = np.broadcast_to(params, (len(X), params.size))
    c = build_encoding_circuit(variant, X) + ansatz.circuit(params)
    return expectation_z_batch(run_pure(c), ansatz.n, range(k))


def forward(ansatz: AnsatzSpec, variant: str, params, x, k: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ShapeError("forward takes a single input vector")
    return forward_batch(ansatz, variant, params, x[None, :], k)[0]


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(logits, s) -> np.ndarray:
    """``max(z) - z_s + log sum exp(z - max(z))``; vectorized over leading axes."""
    z = np.asarray(logits, dtype=float)
    s = np.asarray(s, dtype=int)
    k = z.shape[-1]
    if np.any(s < 0) or np.any(s >= k):
        raise ValueError(f"class index out of range for {k} logits")
    zmax = z.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z - zmax).sum(axis=-1))
    z_s = np.take_along_axis(z, s[..., None], axis=-1)[..., 0]
    return zmax[..., 0] - z_s + lse


def shifted_params(params) -> np.ndarray:
    """Rows: ``params``, then ``params + pi/2 e_p`` and ``params - pi/2 e_p`` for each p."""
    params = np.asarray(params, dtype=float)
    P = params.size
    eye = np.eye(P) * SHIFT
    return np.concatenate([params[None, :], params + eye, params - eye])


def loss_and_grad(ansatz: AnsatzSpec, variant: str, params, X, labels, k: int):
    """Mean loss and parameter-shift gradient over the rows of ``X``.

    Returns ``(mean_loss, grad, logits)``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    labels = np.asarray(labels, dtype=int).reshape(-1)
    P = ansatz.n_params
    shifts = shifted_params(params)  # (2P+1, P)
    R = shifts.shape[0]
    all_params = np.tile(shifts, (len(X), 1))
    all_X = np.repeat(X, R, axis=0)
    z = forward_batch(ansatz, variant, all_params, all_X, k).reshape(len(X), R, k)
    logits = z[:, 0, :]
    dz = (z[:, 1:P + 1, :] - z[:, P + 1:, :]) / 2.0  # (m, P, k): d<Z_q>/d theta_p
    delta = softmax(logits)
    delta[np.arange(len(X)), labels] -= 1.0  # dL/d<Z_q> = delta_q - y_q
    grads = np.einsum("mpk,mk->mp", dz, delta)
    losses = cross_entropy(logits, labels)
    # index-ascending accumulation keeps the sum order fixed
    return float(np.mean(losses)), grads.sum(axis=0) / len(X), logits


def grad_params(ansatz: AnsatzSpec, variant: str, params, x, s: int, k: int) -> np.ndarray:
    return loss_and_grad(ansatz, variant, params, np.asarray(x)[None, :], [s], k)[1]


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size))


def adam_step(state: AdamState, params, grads, lr: float):
    grads = np.asarray(grads, dtype=float)
    if grads.shape != state.m.shape:
        raise ShapeError("gradient and optimizer state sizes differ")
    if not np.all(np.isfinite(grads)):
        bad = np.flatnonzero(~np.isfinite(grads)).tolist()
        raise TrainingAborted(f"non-finite gradient at step {state.t + 1}, parameters {bad}")
    t = state.t + 1
    m = state.beta1 * state.m + (1 - state.beta1) * grads
    v = state.beta2 * state.v + (1 - state.beta2) * grads**2
    m_hat = m / (1 - state.beta1**t)
    v_hat = v / (1 - state.beta2**t)
    new = np.asarray(params, dtype=float) - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new, AdamState(m, v, t, state.beta1, state.beta2, state.eps)


@dataclass
class TrainConfig:
    initial_lr: float = 1e-3
    lr_patience: int = 5
    lr_factor: float = 0.5
    min_lr: float = 1e-6
    early_stop_patience: int = 10
    max_epochs: int = 100
    batch_size: int = 16
    n_layers: int = 3
    seed: int = 0
    init_scale: float = 0.1

    def __post_init__(self):
        for key, val in asdict(self).items():
            if key != "seed" and not val > 0:
                raise ValueError(f"{key} must be positive, got {val}")
        if self.min_lr > self.initial_lr:
            raise ValueError("min_lr exceeds initial_lr")
        if not 0 < self.lr_factor < 1:
            raise ValueError("lr_factor must lie in (0, 1)")


@dataclass
class QnnModel:
    ansatz: AnsatzSpec
    params: np.ndarray
    variant: str
    k: int
    standardizer: Standardizer | None = None
    history: list = field(default_factory=list)
    classes: np.ndarray = None

    def __post_init__(self):
        if self.params.size != self.ansatz.n_params:
            raise ShapeError("parameter count does not match the ansatz")
        if self.k > self.ansatz.n:
            raise CapacityError(f"{self.k} classes need at least {self.k} qubits")
        if self.classes is None:
            self.classes = np.arange(self.k)

    def logits(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.standardizer is not None:
            X = self.standardizer.transform(X)
        return forward_batch(self.ansatz, self.variant, self.params, X, self.k)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "variant": self.variant,
            "n": self.ansatz.n,
            "L_d": self.ansatz.n_layers,
            "k": self.k,
            "params": self.params.tolist(),
            "standardizer": self.standardizer.to_dict() if self.standardizer else None,
            "classes": np.asarray(self.classes).tolist(),
            "history": self.history,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "QnnModel":
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {doc.get('schema_version')!r}")
        std = doc.get("standardizer")
        return cls(
            build_ansatz(doc["n"], doc["L_d"]), np.asarray(doc["params"], dtype=float),
            check_variant(doc["variant"]), int(doc["k"]),
            Standardizer.from_dict(std) if std else None, list(doc.get("history", [])),
            np.asarray(doc["classes"]) if "classes" in doc else None,
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "QnnModel":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def write_log(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "loss", "train_acc", "test_acc", "lr"])
            for h in self.history:
                test_acc = "" if h["test_acc"] is None else repr(h["test_acc"])
                w.writerow([h["epoch"], repr(h["loss"]), repr(h["train_acc"]), test_acc, repr(h["lr"])])


def _accuracy(ansatz, variant, params, X, y, k) -> float:
    pred = np.argmax(forward_batch(ansatz, variant, params, X, k), axis=1)
    return float(np.mean(pred == y))


def train(X_train, y_train, variant: str, config: TrainConfig = None,
          X_test=None, y_test=None, k: int | None = None) -> QnnModel:
    """Mini-batch Adam on standardized inputs; returns the best-epoch parameters.

    Early stopping and best-epoch selection track test accuracy when a test
    split is given, training accuracy otherwise.  The learning rate is halved
    after ``lr_patience`` epochs without a new lowest training loss.
    """
    config = config or TrainConfig()
    check_variant(variant)
    X_train = np.asarray(X_train, dtype=float)
    y_train = np.asarray(y_train, dtype=int)
    if len(X_train) == 0:
        raise ValueError("empty training set")
    n = X_train.shape[1]
    k = int(y_train.max()) + 1 if k is None else k
    if k > n:
        raise CapacityError(f"{k} classes need at least {k} qubits, inputs give {n}")
    ansatz = build_ansatz(n, config.n_layers)
    rng = np.random.default_rng(config.seed)
    params = rng.uniform(-config.init_scale, config.init_scale, ansatz.n_params)
    state = AdamState.zeros(ansatz.n_params)
    lr = config.initial_lr
    monitor_test = X_test is not None and y_test is not None

    best_params, best_acc = params.copy(), -1.0
    best_loss, plateau, stale = np.inf, 0, 0
    history = []
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(X_train))
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grad, _ = loss_and_grad(ansatz, variant, params, X_train[idx], y_train[idx], k)
            total += loss * len(idx)
            params, state = adam_step(state, params, grad, lr)
        epoch_loss = total / len(X_train)
        train_acc = _accuracy(ansatz, variant, params, X_train, y_train, k)
        test_acc = (_accuracy(ansatz, variant, params, np.asarray(X_test, float),
                              np.asarray(y_test, int), k) if monitor_test else None)
        history.append({"epoch": epoch, "loss": epoch_loss, "train_acc": train_acc,
                        "test_acc": test_acc, "lr": lr})

        score = test_acc if monitor_test else train_acc
        if score > best_acc:
            best_acc, best_params, stale = score, params.copy(), 0
        else:
            stale += 1
        if epoch_loss < best_loss:
            best_loss, plateau = epoch_loss, 0
        else:
            plateau += 1
            if plateau >= config.lr_patience:
                lr, plateau = max(config.min_lr, lr * config.lr_factor), 0
        if stale >= config.early_stop_patience:
            break
    return QnnModel(ansatz, best_params, variant, k, history=history)


class QNNClassifier(ClassifierMixin, BaseEstimator):
    """Variational quantum classifier reading ``<Z>`` on the first k qubits.

    ``fit`` accepts an optional held-out split (``X_val``, ``y_val``) that
    drives early stopping and best-epoch selection.
    """

    def __init__(self, variant="IQPl", n_layers=3, initial_lr=1e-3, batch_size=16,
                 max_epochs=100, early_stop_patience=10, lr_patience=5, lr_factor=0.5,
                 min_lr=1e-6, seed=0, standardize=True):
        self.variant = variant
        self.n_layers = n_layers
        self.initial_lr = initial_lr
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.early_stop_patience = early_stop_patience
        self.lr_patience = lr_patience
        self.lr_factor = lr_factor
        self.min_lr = min_lr
        self.seed = seed
        self.standardize = standardize

    def _config(self) -> TrainConfig:
        return TrainConfig(
            initial_lr=self.initial_lr, lr_patience=self.lr_patience, lr_factor=self.lr_factor,
            min_lr=self.min_lr, early_stop_patience=self.early_stop_patience,
            max_epochs=self.max_epochs, batch_size=self.batch_size, n_layers=self.n_layers,
            seed=self.seed,
        )

    def fit(self, X, y, X_val=None, y_val=None):
        X, y = check_X_y(X, y, dtype=float)
        check_classification_targets(y)
        self.classes_, ids = np.unique(y, return_inverse=True)
        std = Standardizer().fit(X) if self.standardize else None
        Xs = std.transform(X) if std else X
        Xv = yv = None
        if X_val is not None:
            Xv = check_array(X_val, dtype=float)
            Xv = std.transform(Xv) if std else Xv
            yv = np.searchsorted(self.classes_, np.asarray(y_val))
        model = train(Xs, ids, self.variant, self._config(), Xv, yv, k=len(self.classes_))
        model.standardizer = std
        model.classes = self.classes_
        self.model_ = model
        self.history_ = model.history
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return self.model_.logits(check_array(X, dtype=float))

    def predict_proba(self, X):
        return softmax(self.decision_function(X))

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]

    @classmethod
    def from_model(cls, model: QnnModel) -> "QNNClassifier":
        est = cls(variant=model.variant, n_layers=model.ansatz.n_layers,
                  standardize=model.standardizer is not None)
        est.model_ = model
        est.classes_ = np.asarray(model.classes)
        est.history_ = model.history
        est.n_features_in_ = model.ansatz.n
        return est
