"""Fidelity quantum kernels, Gram matrices (noiseless and noisy) and PSD repair."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .featuremap import ShapeError, build_encoding_circuit, check_variant, encode_batch
from .noise import NoiseBackend, decompose_rzz, instrument_circuit, resolve_backend
from .statesim import Circuit, all_zero_probability_batch


@dataclass
class KernelMatrix:
    entries: np.ndarray
    variant: str
    backend: str | None = None
    repair_delta: float = 0.0
    noiseless: bool = field(default=True)

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    def to_csv(self, path) -> None:
        header = f"variant={self.variant} backend={self.backend or 'none'} d={self.d}"
        np.savetxt(path, self.entries, delimiter=",", header=header, fmt="%.17g")


def read_kernel_csv(path) -> KernelMatrix:
    text = Path(path).read_text().splitlines()
    meta = dict(tok.split("=", 1) for tok in text[0].lstrip("# ").split())
    entries = np.loadtxt(path, delimiter=",", ndmin=2)
    backend = None if meta["backend"] == "none" else meta["backend"]
    return KernelMatrix(entries, meta["variant"], backend, noiseless=backend is None)


def kernel_circuit(variant: str, x_i, x_j, backend: NoiseBackend | None = None) -> Circuit:
    """Compute-uncompute circuit G(x_i) followed by G^dag(x_j).

    Rows of 2-D inputs are paired up, giving a batched circuit.  With a
    backend the circuit is RZZ-decomposed and instrumented with noise.
    """
    c = build_encoding_circuit(variant, x_i) + build_encoding_circuit(variant, x_j).inverse()
    if backend is not None:
        c = instrument_circuit(decompose_rzz(c), backend)
    return c


def _as_rows(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise ShapeError(f"expected a nonempty 2-D array of inputs, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ShapeError("inputs contain non-finite values")
    return X


def kernel_value(variant: str, x_i, x_j, backend=None) -> float:
    """k(x_i, x_j): state overlap, or all-zeros probability under noise."""
    check_variant(variant)
    x_i, x_j = np.asarray(x_i, dtype=float), np.asarray(x_j, dtype=float)
    if x_i.shape != x_j.shape or x_i.ndim != 1:
        raise ShapeError(f"input shapes differ: {x_i.shape} vs {x_j.shape}")
    backend = resolve_backend(backend)
    if backend is None:
        phi = encode_batch(variant, np.stack([x_i, x_j]))
        return float(min(1.0, abs(np.vdot(phi[0], phi[1])) ** 2))
    return float(all_zero_probability_batch(kernel_circuit(variant, x_i, x_j, backend))[0])


def circuit_kernel_value(variant: str, x_i, x_j) -> float:
    """Noiseless kernel through the compute-uncompute circuit (no overlap shortcut)."""
    return float(all_zero_probability_batch(kernel_circuit(variant, x_i, x_j))[0])


def _noisy_pairs(variant, A, B, backend, chunk=20000) -> np.ndarray:
    out = np.empty(len(A))
    for s in range(0, len(A), chunk):
        c = kernel_circuit(variant, A[s:s + chunk], B[s:s + chunk], backend)
        out[s:s + chunk] = all_zero_probability_batch(c)
    return out


def gram_matrix(variant: str, X, backend=None) -> KernelMatrix:
    """Symmetric Gram matrix over the rows of ``X``.

    Noiseless entries come from pairwise state overlaps with a unit diagonal.
    Under a backend the upper triangle (diagonal included) is simulated and
    mirrored; self-pairs are not forced to 1.
    """
    check_variant(variant)
    X = _as_rows(X)
    backend = resolve_backend(backend)
    d = X.shape[0]
    if backend is None:
        phi = encode_batch(variant, X)
        K = np.abs(phi.conj() @ phi.T) ** 2
        K = np.clip((K + K.T) / 2, 0.0, 1.0)
        np.fill_diagonal(K, 1.0)
        return KernelMatrix(K, variant, None, noiseless=True)
    iu, ju = np.triu_indices(d)
    vals = _noisy_pairs(variant, X[iu], X[ju], backend)
    K = np.empty((d, d))
    K[iu, ju] = vals
    K[ju, iu] = vals
    return KernelMatrix(K, variant, backend.name, noiseless=False)


def cross_kernel(variant: str, X_train, P, backend=None) -> np.ndarray:
    """Matrix ``k(x_i, p)`` with training rows as the first argument; shape (len(P), len(X_train))."""
    check_variant(variant)
    X_train, P = _as_rows(X_train), _as_rows(P)
    if X_train.shape[1] != P.shape[1]:
        raise ShapeError(f"inputs have {P.shape[1]} features, training data {X_train.shape[1]}")
    backend = resolve_backend(backend)
    if backend is None:
        phi_x = encode_batch(variant, X_train)
        phi_p = encode_batch(variant, P)
        return np.clip(np.abs(phi_p.conj() @ phi_x.T) ** 2, 0.0, 1.0)
    ip, ix = np.meshgrid(np.arange(len(P)), np.arange(len(X_train)), indexing="ij")
    vals = _noisy_pairs(variant, X_train[ix.ravel()], P[ip.ravel()], backend)
    return vals.reshape(len(P), len(X_train))


def psd_project(K: KernelMatrix, tol: float = 1e-9) -> KernelMatrix:
    """Clamp negative eigenvalues to zero; returns a new matrix with ``repair_delta`` set."""
    A = np.asarray(K.entries, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("kernel matrix must be square")
    if not np.allclose(A, A.T, atol=tol, rtol=0):
        raise ValueError("kernel matrix is not symmetric")
    A = (A + A.T) / 2
    w, V = np.linalg.eigh(A)
    if w.min() >= 0:
        return KernelMatrix(A, K.variant, K.backend, 0.0, K.noiseless)
    R = (V * np.clip(w, 0, None)) @ V.T
    R = (R + R.T) / 2
    if K.noiseless:
        s = np.sqrt(np.clip(np.diag(R), 1e-300, None))
        R = R / np.outer(s, s)
    delta = float(np.linalg.norm(R - A))
    return KernelMatrix(R, K.variant, K.backend, delta, K.noiseless)
