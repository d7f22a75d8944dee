from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qkdqml.featuremap import (
    VARIANTS,
    ShapeError,
    build_encoding_circuit,
    encode,
    encode_batch,
    entanglement_edges,
)

from oracles import bits, closed_form_state


def test_anrx_zero_input_is_ground_state():
    assert np.allclose(encode("AnRx", np.zeros(4)).amplitudes, np.eye(16)[0])


def test_anrz_single_qubit_zero():
    assert np.allclose(encode("AnRz", [0.0]).amplitudes, [1 / math.sqrt(2)] * 2, atol=1e-15)


def test_edge_sets():
    assert entanglement_edges("IQPf", 3) == [(0, 1), (0, 2), (1, 2)]
    assert entanglement_edges("IQPc", 3) == [(0, 1), (1, 2), (2, 0)]
    assert entanglement_edges("IQPl", 4) == [(0, 1), (1, 2), (2, 3)]
    c = build_encoding_circuit("IQPf", [0.1, 0.2, 0.3])
    assert sum(g.kind == "RZZ" for g in c.gates) == 3
    assert entanglement_edges("IQPl", 1) == []
    assert entanglement_edges("AnRx", 5) == []


def test_literal_examples():
    assert np.allclose(encode("AnRy", [math.pi]).amplitudes, [0, 1], atol=1e-15)
    s = math.sin(math.pi / 4)
    assert np.allclose(encode("AnRx", [math.pi / 2, 0]).amplitudes, [s, 0, -1j * s, 0], atol=1e-15)
    assert np.allclose(encode("IQPl", [0, 0]).amplitudes, [0.5] * 4, atol=1e-15)


def test_gate_layout():
    kinds = [g.kind for g in build_encoding_circuit("AnRz", [0.1, 0.2]).gates]
    assert kinds == ["H", "PHASE", "H", "PHASE"] or kinds == ["H", "H", "PHASE", "PHASE"]
    iqp = [g.kind for g in build_encoding_circuit("IQPl", [0.1, 0.2, 0.3]).gates]
    assert iqp[-2:] == ["RZZ", "RZZ"] and iqp.count("H") == 3 and iqp.count("PHASE") == 3


def test_shape_errors():
    with pytest.raises(ShapeError):
        encode("AnRx", [])
    with pytest.raises(ShapeError):
        encode("AnRx", [[0.1, 0.2]] * 2)
    with pytest.raises(ShapeError):
        build_encoding_circuit("AnRx", [0.1, 0.2], n=3)
    with pytest.raises(ValueError):
        encode("AnRw", [0.1])


@settings(max_examples=60, deadline=None)
@given(variant=st.sampled_from(VARIANTS), n=st.integers(2, 6), seed=st.integers(0, 2**32 - 1))
def test_amplitudes_match_closed_form(variant, n, seed):
    x = np.random.default_rng(seed).uniform(-math.pi, math.pi, n)
    got = encode(variant, x).amplitudes
    want = closed_form_state(variant, x)
    assert abs(np.vdot(got, got) - 1) < 1e-10
    # equal up to a global phase
    overlap = np.vdot(want, got)
    assert abs(abs(overlap) - 1) < 1e-10
    assert np.max(np.abs(got - overlap * want)) < 1e-10


def test_closed_form_sweep_200_per_variant():
    rng = np.random.default_rng(11)
    for variant in VARIANTS:
        for _ in range(200):
            n = int(rng.integers(2, 7))
            x = rng.uniform(-3, 3, n)
            got, want = encode(variant, x).amplitudes, closed_form_state(variant, x)
            assert abs(abs(np.vdot(want, got)) - 1) < 1e-10


def test_angle_phase_free_variants_match_exactly():
    x = np.array([0.4, -1.3, 2.2])
    for variant in ("AnRx", "AnRy", "AnRz"):
        assert np.max(np.abs(encode(variant, x).amplitudes - closed_form_state(variant, x))) < 1e-12


def test_iqpf_permutation_relabels_basis():
    rng = np.random.default_rng(3)
    n = 4
    x = rng.uniform(-2, 2, n)
    perm = rng.permutation(n)
    a = encode("IQPf", x).amplitudes
    b = encode("IQPf", x[perm]).amplitudes
    # new qubit q carries old coordinate perm[q]
    for m in range(2 ** n):
        old = bits(m, n)
        new = [old[perm[q]] for q in range(n)]
        idx = int("".join(map(str, new)), 2)
        assert abs(b[idx] - a[m]) < 1e-12


def test_batch_matches_single():
    X = np.random.default_rng(4).normal(size=(7, 5))
    for variant in VARIANTS:
        B = encode_batch(variant, X)
        for i in range(7):
            assert np.allclose(B[i], encode(variant, X[i]).amplitudes, atol=1e-14)


def test_single_qubit_iqp_is_phase_only():
    assert np.allclose(encode("IQPf", [0.7]).amplitudes, encode("AnRz", [0.7]).amplitudes)
