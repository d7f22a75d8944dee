"""Angle and IQP encoding circuits for classical feature vectors."""
from __future__ import annotations

import itertools

import numpy as np

from .statesim import Circuit, Gate, PureState, run_pure

VARIANTS = ("AnRx", "AnRy", "AnRz", "IQPl", "IQPc", "IQPf")
ANGLE_VARIANTS = VARIANTS[:3]
IQP_VARIANTS = VARIANTS[3:]


class ShapeError(ValueError):
    pass


def check_variant(variant: str) -> str:
    if variant not in VARIANTS:
        raise ValueError(f"unknown encoding variant {variant!r}; expected one of {VARIANTS}")
    return variant


def entanglement_edges(variant: str, n: int) -> list[tuple[int, int]]:
    """Qubit pairs coupled by the IQP variant (empty for angle encodings)."""
    check_variant(variant)
    if variant == "IQPl":
        return [(i, i + 1) for i in range(n - 1)]
    if variant == "IQPc":
        if n < 2:
            return []
        if n == 2:
            # (0,1) and (1,0) coincide on two qubits
            return [(0, 1), (1, 0)]
        return [(i, (i + 1) % n) for i in range(n)]
    if variant == "IQPf":
        return list(itertools.combinations(range(n), 2))
    return []


def _columns(x) -> tuple[int, list]:
    """Per-qubit angles as scalars (1-D input) or arrays (2-D batch input)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        cols = [float(v) for v in x]
    elif x.ndim == 2:
        cols = [x[:, i] for i in range(x.shape[1])]
    else:
        raise ShapeError(f"expected a vector or a batch of vectors, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ShapeError("input contains non-finite values")
    if len(cols) == 0:
        raise ShapeError("empty input vector")
    return len(cols), cols


def build_encoding_circuit(variant: str, x, n: int | None = None) -> Circuit:
    """Encoding circuit for ``x``; a 2-D ``x`` yields a batched circuit."""
    check_variant(variant)
    width, cols = _columns(x)
    if n is not None and n != width:
        raise ShapeError(f"input has {width} features but the register has {n} qubits")
    c = Circuit(width)
    if variant in ("AnRx", "AnRy"):
        kind = "RX" if variant == "AnRx" else "RY"
        for q, a in enumerate(cols):
            c.add(Gate(kind, (q,), (a,)))
        return c
    for q in range(width):
        c.add(Gate("H", (q,)))
    for q, a in enumerate(cols):
        c.add(Gate("PHASE", (q,), (a,)))
    for i, j in entanglement_edges(variant, width):
        c.add(Gate("RZZ", (i, j), (cols[i] * cols[j],)))
    return c


def encode(variant: str, x) -> PureState:
    c = build_encoding_circuit(variant, x)
    if c.batch_size:
        raise ShapeError("encode takes a single vector; use encode_batch")
    return PureState(c.n, run_pure(c)[0])


def encode_batch(variant: str, X) -> np.ndarray:
    """Feature states for the rows of ``X`` as an array ``(len(X), 2**n)``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return run_pure(build_encoding_circuit(variant, X))
