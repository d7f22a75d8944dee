"""Exact small-register simulation: statevectors and density matrices.

Basis ordering: qubit 0 is the most significant bit of the basis index, so a
length-``2**n`` vector reshaped (C order) to ``(2,) * n`` has qubit ``q`` on
axis ``q``.

Gates carry angles that may be scalars or 1-D arrays.  An array angle turns a
gate into a *batch* of gates, and the batched kernels below (``run_pure`` and
``run_density``) then evolve one state per batch entry in a single pass.  The
``PureState``/``MixedState`` API is the unbatched view of the same kernels.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

MAX_QUBITS = 12

_SQRT2_INV = 1.0 / np.sqrt(2.0)
_I2 = np.eye(2, dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT2_INV
_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)

GATE_ARITY = {
    "H": 1, "RX": 1, "RY": 1, "RZ": 1, "PHASE": 1, "U3": 1,
    "RZZ": 2, "CNOT": 2,
}
GATE_NANGLES = {
    "H": 0, "RX": 1, "RY": 1, "RZ": 1, "PHASE": 1, "U3": 3,
    "RZZ": 1, "CNOT": 0,
}


class SimulationError(ValueError):
    """Base class for simulator errors."""


class QubitCountError(SimulationError):
    pass


class TargetError(SimulationError):
    pass


class ChannelError(SimulationError):
    pass


Angle = Union[float, np.ndarray]


@dataclass(frozen=True)
class Gate:
    """A symbolic gate; realized as a dense matrix on demand.

    ``angles`` entries may be floats or equal-length 1-D arrays (a gate batch).
    For ``U3`` the angles are ``(omega, phi, lam)``.  ``CNOT`` targets are
    ``(control, target)``.
    """

    kind: str
    targets: tuple
    angles: tuple = ()

    def __post_init__(self):
        if self.kind not in GATE_ARITY:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        object.__setattr__(self, "angles", tuple(self.angles))
        if len(self.targets) != GATE_ARITY[self.kind]:
            raise TargetError(
                f"{self.kind} acts on {GATE_ARITY[self.kind]} qubit(s), "
                f"got targets {self.targets}"
            )
        if len(set(self.targets)) != len(self.targets):
            raise TargetError(f"duplicate targets {self.targets} for {self.kind}")
        if len(self.angles) != GATE_NANGLES[self.kind]:
            raise ValueError(
                f"{self.kind} takes {GATE_NANGLES[self.kind]} angle(s), "
                f"got {len(self.angles)}"
            )

    @property
    def batch_size(self) -> int | None:
        sizes = {np.shape(a)[0] for a in self.angles if np.ndim(a) > 0}
        if len(sizes) > 1:
            raise ValueError(f"inconsistent angle batch sizes {sizes}")
        return sizes.pop() if sizes else None

    def matrix(self) -> np.ndarray:
        """Dense matrix, shape ``(d, d)`` or ``(B, d, d)`` for a gate batch."""
        return gate_matrix(self.kind, self.angles)

    def inverse(self) -> "Gate":
        k, a = self.kind, self.angles
        if k in ("H", "CNOT"):
            return self
        if k == "U3":
            omega, phi, lam = a
            return Gate("U3", self.targets, (-omega, -lam, -phi))
        return Gate(k, self.targets, tuple(-np.asarray(t) if np.ndim(t) else -t for t in a))


def _stack2(a, b, c, d) -> np.ndarray:
    """Assemble 2x2 matrices from entries that may be scalars or arrays."""
    a, b, c, d = np.broadcast_arrays(*(np.asarray(v, dtype=complex) for v in (a, b, c, d)))
    out = np.empty(a.shape + (2, 2), dtype=complex)
    out[..., 0, 0], out[..., 0, 1], out[..., 1, 0], out[..., 1, 1] = a, b, c, d
    return out


def gate_matrix(kind: str, angles: Sequence[Angle] = ()) -> np.ndarray:
    if kind == "H":
        return _H
    if kind == "CNOT":
        return _CNOT
    if kind == "U3":
        omega, phi, lam = (np.asarray(t, dtype=float) for t in angles)
        c, s = np.cos(omega / 2), np.sin(omega / 2)
        return _stack2(
            np.exp(-0.5j * (phi + lam)) * c,
            -np.exp(0.5j * (phi - lam)) * s,
            np.exp(-0.5j * (phi - lam)) * s,
            np.exp(0.5j * (phi + lam)) * c,
        )
    t = np.asarray(angles[0], dtype=float)
    c, s = np.cos(t / 2), np.sin(t / 2)
    zero = np.zeros_like(t)
    if kind == "RX":
        return _stack2(c, -1j * s, -1j * s, c)
    if kind == "RY":
        return _stack2(c, -s, s, c)
    if kind == "RZ":
        return _stack2(np.exp(-0.5j * t), zero, zero, np.exp(0.5j * t))
    if kind == "PHASE":
        return _stack2(np.ones_like(t), zero, zero, np.exp(1j * t))
    if kind == "RZZ":
        # exp(-i t/2 Z⊗Z): phase e^{-it/2} on |00>,|11>, e^{+it/2} on |01>,|10>
        m, p = np.exp(-0.5j * t), np.exp(0.5j * t)
        out = np.zeros(t.shape + (4, 4), dtype=complex)
        out[..., 0, 0], out[..., 1, 1], out[..., 2, 2], out[..., 3, 3] = m, p, p, m
        return out
    raise ValueError(f"unknown gate kind {kind!r}")


@dataclass(frozen=True)
class KrausChannel:
    """Single-qubit CPTP map given by its Kraus operators."""

    label: str
    operators: tuple

    def __post_init__(self):
        ops = tuple(np.asarray(m, dtype=complex) for m in self.operators)
        object.__setattr__(self, "operators", ops)
        if not ops or any(m.shape != (2, 2) for m in ops):
            raise ChannelError(f"{self.label}: Kraus operators must be 2x2")
        dev = cptp_deviation(ops)
        if dev > 1e-12:
            raise ChannelError(f"{self.label}: sum M^dag M deviates from I by {dev:.3e}")


def cptp_deviation(operators) -> float:
    total = sum(m.conj().T @ m for m in operators)
    return float(np.max(np.abs(total - _I2)))


@dataclass(frozen=True)
class ChannelOp:
    """A noise-channel marker placed in a circuit on one qubit."""

    channel: KrausChannel
    qubit: int


@dataclass
class Circuit:
    """Ordered list of gates and channel markers on ``n`` qubits."""

    n: int
    ops: list = field(default_factory=list)

    def __post_init__(self):
        _check_n(self.n)

    def add(self, op) -> "Circuit":
        targets = op.targets if isinstance(op, Gate) else (op.qubit,)
        for t in targets:
            if not 0 <= t < self.n:
                raise TargetError(f"target {t} out of range for {self.n} qubits")
        self.ops.append(op)
        return self

    def extend(self, ops) -> "Circuit":
        for op in ops:
            self.add(op)
        return self

    @property
    def gates(self) -> list:
        return [op for op in self.ops if isinstance(op, Gate)]

    @property
    def channels(self) -> list:
        return [op for op in self.ops if isinstance(op, ChannelOp)]

    @property
    def is_noisy(self) -> bool:
        return any(isinstance(op, ChannelOp) for op in self.ops)

    @property
    def batch_size(self) -> int | None:
        sizes = {g.batch_size for g in self.gates} - {None}
        if len(sizes) > 1:
            raise ValueError(f"inconsistent gate batch sizes {sizes}")
        return sizes.pop() if sizes else None

    def inverse(self) -> "Circuit":
        if self.is_noisy:
            raise ValueError("cannot invert a circuit containing channels")
        return Circuit(self.n, [g.inverse() for g in reversed(self.ops)])

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.n != self.n:
            raise ValueError("qubit counts differ")
        return Circuit(self.n, list(self.ops) + list(other.ops))

    def components(self) -> list[list[int]]:
        """Qubit groups never coupled by a multi-qubit gate, in ascending order."""
        parent = list(range(self.n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for g in self.gates:
            if len(g.targets) > 1:
                roots = [find(t) for t in g.targets]
                for r in roots[1:]:
                    parent[max(r, roots[0])] = min(r, roots[0])
        groups: dict[int, list[int]] = {}
        for q in range(self.n):
            groups.setdefault(find(q), []).append(q)
        return sorted(groups.values())

    def restrict(self, qubits: Sequence[int]) -> "Circuit":
        """Sub-circuit on ``qubits`` (re-indexed 0..len-1); ops elsewhere dropped."""
        index = {q: i for i, q in enumerate(qubits)}
        out = Circuit(len(qubits))
        for op in self.ops:
            if isinstance(op, Gate):
                if all(t in index for t in op.targets):
                    out.ops.append(Gate(op.kind, tuple(index[t] for t in op.targets), op.angles))
                elif any(t in index for t in op.targets):
                    raise ValueError("gate straddles the requested qubit group")
            elif op.qubit in index:
                out.ops.append(ChannelOp(op.channel, index[op.qubit]))
        return out


def _check_n(n: int) -> None:
    if not 1 <= n <= MAX_QUBITS:
        raise QubitCountError(f"qubit count must be in [1, {MAX_QUBITS}], got {n}")


# --- batched kernels -------------------------------------------------------
# Pure tensors have shape (B, 2, ..., 2) with n qubit axes; density tensors
# have shape (B, 2, ..., 2) with 2n axes (rows first, then columns).


def _apply_matrix(t: np.ndarray, mat: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    k = len(axes)
    src = [1 + a for a in axes]
    dst = list(range(t.ndim - k, t.ndim))
    moved = np.moveaxis(t, src, dst)
    shape = moved.shape
    flat = moved.reshape(shape[0], -1, 2**k)
    if mat.ndim == 3 and mat.shape[0] != shape[0]:
        raise ValueError("gate batch does not match state batch")
    flat = flat @ np.swapaxes(mat, -1, -2)
    return np.moveaxis(flat.reshape(shape), dst, src)


def _gate_pure(t, gate: Gate):
    return _apply_matrix(t, gate.matrix(), gate.targets)


def _gate_density(t, gate: Gate, n: int):
    mat = gate.matrix()
    t = _apply_matrix(t, mat, gate.targets)
    return _apply_matrix(t, mat.conj(), [n + q for q in gate.targets])


def _channel_density(t, channel: KrausChannel, qubit: int, n: int):
    ops = channel.operators
    if len(ops) == 1:
        out = _apply_matrix(t, ops[0], [qubit])
        return _apply_matrix(out, ops[0].conj(), [n + qubit])
    out = np.zeros_like(t)
    for m in ops:
        out += _apply_matrix(_apply_matrix(t, m, [qubit]), m.conj(), [n + qubit])
    return out


def zero_pure_batch(n: int, batch: int) -> np.ndarray:
    _check_n(n)
    t = np.zeros((batch, 2**n), dtype=complex)
    t[:, 0] = 1.0
    return t


def zero_density_batch(n: int, batch: int) -> np.ndarray:
    _check_n(n)
    t = np.zeros((batch, 2**n, 2**n), dtype=complex)
    t[:, 0, 0] = 1.0
    return t


def run_pure(circuit: Circuit, states: np.ndarray | None = None) -> np.ndarray:
    """Evolve a batch of statevectors, shape ``(B, 2**n)``, through ``circuit``."""
    if circuit.is_noisy:
        raise ChannelError("noise channels need the density-matrix simulator")
    n = circuit.n
    if states is None:
        states = zero_pure_batch(n, circuit.batch_size or 1)
    t = states.reshape((states.shape[0],) + (2,) * n)
    for g in circuit.ops:
        t = _gate_pure(t, g)
    return t.reshape(states.shape[0], 2**n)


def run_density(circuit: Circuit, rhos: np.ndarray | None = None) -> np.ndarray:
    """Evolve a batch of density matrices, shape ``(B, 2**n, 2**n)``."""
    n = circuit.n
    if rhos is None:
        rhos = zero_density_batch(n, circuit.batch_size or 1)
    t = rhos.reshape((rhos.shape[0],) + (2,) * (2 * n))
    for op in circuit.ops:
        if isinstance(op, Gate):
            t = _gate_density(t, op, n)
        else:
            t = _channel_density(t, op.channel, op.qubit, n)
    return t.reshape(rhos.shape[0], 2**n, 2**n)


def all_zero_probability_batch(circuit: Circuit, chunk: int = 4096) -> np.ndarray:
    """All-zeros outcome probability for every batch entry of ``circuit``.

    Starting from |0...0>, a circuit whose multi-qubit gates never link two
    qubit groups leaves the groups in a product state, and every channel here
    is single-qubit, so the probability factorizes over groups.  Each group is
    simulated on its own (a 1-qubit group is a 2x2 density matrix).
    """
    batch = circuit.batch_size or 1
    prob = np.ones(batch)
    for group in circuit.components():
        sub = circuit.restrict(group)
        dim = 2 ** len(group)
        # bound memory for large groups
        step = max(1, min(batch, chunk if dim <= 8 else max(1, chunk * 64 // dim**2)))
        for start in range(0, batch, step):
            part = _slice_circuit(sub, start, start + step) if sub.batch_size else sub
            if circuit.is_noisy:
                rho = run_density(part, zero_density_batch(sub.n, min(step, batch - start)))
                p = rho[:, 0, 0].real
            else:
                psi = run_pure(part, zero_pure_batch(sub.n, min(step, batch - start)))
                p = np.abs(psi[:, 0]) ** 2
            prob[start:start + step] *= p
    return np.clip(prob, 0.0, 1.0)


def _slice_circuit(circuit: Circuit, start: int, stop: int) -> Circuit:
    ops = []
    for op in circuit.ops:
        if isinstance(op, Gate) and op.batch_size:
            angles = tuple(a[start:stop] if np.ndim(a) else a for a in op.angles)
            ops.append(Gate(op.kind, op.targets, angles))
        else:
            ops.append(op)
    return Circuit(circuit.n, ops)


# --- unbatched state API ---------------------------------------------------


@dataclass
class PureState:
    n: int
    amplitudes: np.ndarray

    def __post_init__(self):
        _check_n(self.n)
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if self.amplitudes.size != 2**self.n:
            raise ValueError(f"expected {2**self.n} amplitudes, got {self.amplitudes.size}")

    @property
    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def to_density(self) -> "MixedState":
        a = self.amplitudes
        return MixedState(self.n, np.outer(a, a.conj()))


@dataclass
class MixedState:
    n: int
    rho: np.ndarray

    def __post_init__(self):
        _check_n(self.n)
        self.rho = np.asarray(self.rho, dtype=complex)
        if self.rho.shape != (2**self.n, 2**self.n):
            raise ValueError(f"rho must be {2**self.n}x{2**self.n}, got {self.rho.shape}")

    @property
    def trace(self) -> float:
        return float(np.trace(self.rho).real)


State = Union[PureState, MixedState]


def new_zero_state(n: int) -> PureState:
    _check_n(n)
    return PureState(n, zero_pure_batch(n, 1)[0])


def _check_targets(n: int, targets) -> None:
    for t in targets:
        if not 0 <= t < n:
            raise TargetError(f"target {t} out of range for {n} qubits")


def apply_gate(state: State, gate: Gate) -> State:
    _check_targets(state.n, gate.targets)
    if gate.batch_size:
        raise ValueError("apply_gate takes scalar-angle gates; use run_pure for batches")
    n = state.n
    if isinstance(state, PureState):
        t = state.amplitudes.reshape((1,) + (2,) * n)
        return PureState(n, _gate_pure(t, gate).reshape(-1))
    t = state.rho.reshape((1,) + (2,) * (2 * n))
    return MixedState(n, _renormalize(_gate_density(t, gate, n).reshape(2**n, 2**n)))


def apply_channel(state: MixedState, channel: KrausChannel, qubit: int) -> MixedState:
    if not isinstance(state, MixedState):
        raise TypeError("channels act on MixedState; convert with to_density()")
    _check_targets(state.n, (qubit,))
    if cptp_deviation(channel.operators) > 1e-12:
        raise ChannelError(f"{channel.label} is not trace preserving")
    n = state.n
    t = state.rho.reshape((1,) + (2,) * (2 * n))
    out = _channel_density(t, channel, qubit, n).reshape(2**n, 2**n)
    return MixedState(n, _renormalize(out))


def _renormalize(rho: np.ndarray) -> np.ndarray:
    tr = np.trace(rho).real
    dev = abs(tr - 1.0)
    if dev >= 1e-8:
        raise SimulationError(f"trace drifted to {tr!r}")
    return rho / tr if dev > 0 else rho


def simulate(circuit: Circuit, state: State | None = None) -> State:
    """Run ``circuit`` (scalar angles) on ``state`` (default |0...0>).

    Noisy circuits force the density-matrix representation.
    """
    if state is None:
        state = new_zero_state(circuit.n)
    if circuit.is_noisy and isinstance(state, PureState):
        state = state.to_density()
    for op in circuit.ops:
        if isinstance(op, Gate):
            state = apply_gate(state, op)
        else:
            state = apply_channel(state, op.channel, op.qubit)
    return state


def probability_all_zero(state: State) -> float:
    if isinstance(state, PureState):
        p = abs(state.amplitudes[0]) ** 2
    else:
        p = state.rho[0, 0].real
    return float(min(1.0, max(0.0, p)))


def qubit_probabilities(state: State, qubit: int) -> tuple[float, float]:
    """Marginal probabilities of outcomes 0 and 1 on ``qubit``."""
    _check_targets(state.n, (qubit,))
    n = state.n
    if isinstance(state, PureState):
        probs = np.abs(state.amplitudes.reshape((2,) * n)) ** 2
        p = probs.sum(axis=tuple(i for i in range(n) if i != qubit))
    else:
        diag = np.diagonal(state.rho).real.reshape((2,) * n)
        p = diag.sum(axis=tuple(i for i in range(n) if i != qubit))
    return float(p[0]), float(p[1])


def expectation_z(state: State, qubit: int) -> float:
    p0, p1 = qubit_probabilities(state, qubit)
    return float(np.clip(p0 - p1, -1.0, 1.0))


def expectation_z_batch(states: np.ndarray, n: int, qubits: Sequence[int]) -> np.ndarray:
    """<Z_q> for a batch of statevectors ``(B, 2**n)``; returns ``(B, len(qubits))``."""
    probs = (np.abs(states) ** 2).reshape((states.shape[0],) + (2,) * n)
    out = np.empty((states.shape[0], len(qubits)))
    for j, q in enumerate(qubits):
        marg = probs.sum(axis=tuple(1 + i for i in range(n) if i != q))
        out[:, j] = marg[:, 0] - marg[:, 1]
    return out
