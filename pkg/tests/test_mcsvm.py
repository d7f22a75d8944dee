from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.exceptions import ConvergenceWarning

from qkdqml.evalkit import split
from qkdqml.mcsvm import (
    BinaryDual,
    ClassCoverageError,
    DegenerateLabelsError,
    IndefiniteKernelWarning,
    QuantumKernelSVC,
    SvmModel,
    argmax_lowest,
    dual_objective,
    scores_from_kernel,
    train_binary,
    train_ovr,
)
from qkdqml.qkdgen import known_attack_dataset
from qkdqml.qkernel import cross_kernel, gram_matrix

from oracles import bias_from_kkt, dual_value, lattice_dual, projected_gradient_dual, svm_corpus


def test_identity_kernel_two_points():
    d = train_binary(np.eye(2), [1, -1], C=10)
    assert np.allclose(d.alphas, [1, 1], atol=1e-6)
    assert d.bias == pytest.approx(0.0, abs=1e-6)
    assert d.converged


def test_feasibility_and_kkt():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 4))
    y = np.where(rng.random(30) < 0.5, 1.0, -1.0)
    K = gram_matrix("IQPl", X).entries
    d = train_binary(K, y, C=1.0)
    assert np.all(d.alphas >= 0) and np.all(d.alphas <= 1.0)
    assert abs(d.alphas @ y) < 1e-8
    assert d.kkt_violation < 1e-5


def test_small_c_collapses_alphas():
    K = gram_matrix("AnRx", np.random.default_rng(1).normal(size=(6, 2))).entries
    y = np.array([1, 1, -1, -1, 1, -1.0])
    d = train_binary(K, y, C=1e-9)
    assert np.all(d.alphas <= 1e-9)
    scores = scores_from_kernel([d], K)[:, 0]
    assert np.allclose(scores, d.bias, atol=1e-8)


def test_errors():
    with pytest.raises(DegenerateLabelsError):
        train_binary(np.eye(3), [1, 1, 1])
    with pytest.raises(ValueError):
        train_binary(np.eye(3), [1, -1, 2])
    with pytest.raises(ValueError):
        train_binary(np.eye(3), [1, -1])
    with pytest.raises(ClassCoverageError):
        train_ovr(np.eye(3), [0, 0, 0])
    with pytest.raises(ClassCoverageError):
        train_ovr(np.eye(3), [0, 2, 2])


def test_iteration_cap_warns():
    K = gram_matrix("AnRx", np.random.default_rng(2).normal(size=(12, 3))).entries
    y = np.array([1, -1] * 6, dtype=float)
    with pytest.warns(ConvergenceWarning):
        d = train_binary(K, y, C=10, max_iter=1)
    assert not d.converged and d.iterations == 1


def test_lattice_oracle_four_points():
    # separable 4-point set in one feature, angle kernel
    X = np.array([[-1.2], [-0.8], [0.9], [1.3]])
    y = np.array([-1, -1, 1, 1.0])
    K = gram_matrix("AnRy", X).entries
    d = train_binary(K, y, C=5.0)
    _, best = lattice_dual(K, y, 5.0, steps=20)
    assert dual_objective(d.alphas, K, y) >= best - 1e-6
    pred = np.sign(scores_from_kernel([d], K)[:, 0])
    assert np.array_equal(pred, y)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(2, 6), C=st.sampled_from([0.1, 1.0, 10.0]))
def test_solver_beats_lattice(seed, d, C):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(d, 3))
    y = np.concatenate([[1.0, -1.0], np.where(rng.random(d - 2) < 0.5, 1.0, -1.0)])
    K = gram_matrix("IQPc", X).entries
    sol = train_binary(K, y, C)
    _, best = lattice_dual(K, y, C, steps=6)
    assert dual_objective(sol.alphas, K, y) >= best - 1e-6


def test_projected_gradient_oracle_corpus():
    for variant, X, labels, X_test, C in svm_corpus():
        K = gram_matrix(variant, X).entries
        Kt = cross_kernel(variant, X, X_test)
        k = labels.max() + 1
        duals = train_ovr(K, labels, C)
        oracle = []
        for s, dual in enumerate(duals):
            y = np.where(labels == s, 1.0, -1.0)
            a = projected_gradient_dual(K, y, C)
            assert abs(dual_value(a, K, y) - dual_objective(dual.alphas, K, y)) < 1e-4
            oracle.append(BinaryDual(a, bias_from_kkt(a, K, y, C), y))
        ours = argmax_lowest(scores_from_kernel(duals, Kt))
        ref = argmax_lowest(scores_from_kernel(oracle, Kt))
        assert np.array_equal(ours, ref)
        assert ours.max() < k


def test_two_class_scores_mirror():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(12, 3))
    labels = np.array([0, 1] * 6)
    K = gram_matrix("AnRx", X).entries
    d0, d1 = train_ovr(K, labels, C=1.0)
    Kt = cross_kernel("AnRx", X, rng.normal(size=(4, 3)))
    s = scores_from_kernel([d0, d1], Kt)
    # y^1 = -y^0, so the dual is shared and the kernel parts are exact negatives
    assert np.allclose(s[:, 0] - d0.bias, -(s[:, 1] - d1.bias), atol=1e-9)


def test_separable_three_class_train_accuracy():
    rng = np.random.default_rng(4)
    centers = np.array([[-2.0, 0.0], [2.0, 0.0], [0.0, 2.5]])
    labels = np.repeat(np.arange(3), 8)
    X = centers[labels] + 0.15 * rng.normal(size=(24, 2))
    clf = QuantumKernelSVC("AnRx", C=10, standardize=False).fit(X, labels)
    assert np.array_equal(clf.predict(X), labels)
    assert np.array_equal(clf.train_predictions(), labels)


def test_argmax_and_ties():
    assert argmax_lowest([0.2, 0.9, -1]) == 1
    assert argmax_lowest([0.5, 0.5]) == 0
    s = np.random.default_rng(5).normal(size=(10, 4))
    assert np.array_equal(argmax_lowest(s), argmax_lowest(3.7 * s))


def test_zero_alphas_score_is_bias():
    d = BinaryDual(np.zeros(3), 0.25, np.array([1, -1, 1.0]))
    assert np.allclose(scores_from_kernel([d], np.ones((2, 3))), 0.25)


def test_permuted_training_order_same_predictions():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(30, 3))
    y = rng.integers(0, 3, 30)
    P = rng.normal(size=(15, 3))
    a = QuantumKernelSVC("IQPf").fit(X, y).predict(P)
    perm = rng.permutation(30)
    b = QuantumKernelSVC("IQPf").fit(X[perm], y[perm]).predict(P)
    assert np.array_equal(a, b)


def test_model_json_roundtrip(tmp_path):
    rng = np.random.default_rng(7)
    X, y = rng.normal(size=(15, 4)), rng.integers(0, 3, 15)
    clf = QuantumKernelSVC("AnRz", C=2.0).fit(X, y)
    clf.model_.save(tmp_path / "m.json")
    back = SvmModel.load(tmp_path / "m.json")
    for a, b in zip(back.duals, clf.model_.duals):
        assert np.array_equal(a.alphas, b.alphas) and a.bias == b.bias
    assert np.array_equal(back.training_inputs, clf.model_.training_inputs)
    P = rng.normal(size=(5, 4))
    assert np.array_equal(QuantumKernelSVC.from_model(back).decision_function(P), clf.decision_function(P))
    doc = back.to_dict()
    assert set(doc) == {"schema_version", "variant", "backend", "C", "standardizer", "classes",
                        "per_class", "training_inputs"}
    assert set(doc["standardizer"]) == {"means", "stds"}


def test_indefinite_kernel_warns():
    K = np.array([[1.0, 1.2], [1.2, 1.0]])
    with pytest.warns(IndefiniteKernelWarning):
        train_ovr(K, [0, 1])


def test_noisy_fit_repairs_kernel():
    rng = np.random.default_rng(8)
    X, y = rng.normal(size=(12, 3)), np.repeat([0, 1, 2], 4)
    with warnings.catch_warnings():
        warnings.simplefilter("error", IndefiniteKernelWarning)
        clf = QuantumKernelSVC("AnRx", backend="HNAM").fit(X, y)
    assert clf.kernel_repair_delta_ >= 0
    assert clf.model_.backend == "HNAM"
    assert clf.predict(X).shape == (12,)


def test_sklearn_params():
    clf = QuantumKernelSVC("IQPl", C=3.0)
    assert clf.get_params()["C"] == 3.0 and clf.get_params()["variant"] == "IQPl"
    assert clf.set_params(C=0.5).C == 0.5


@pytest.mark.parametrize("C", [0.1, 1.0, 10.0])
def test_known_dataset_penalty_sweep(C):
    ds = known_attack_dataset(seed=0)
    tr, te = split(ds.y, 0.3, seed=0)
    with warnings.catch_warnings():
        warnings.simplefilter("error", ConvergenceWarning)
        clf = QuantumKernelSVC("AnRx", C=C).fit(ds.X[tr], ds.y[tr])
    # C = 0.1 under-fits the shot-noise ratio boundary; C >= 1 separates it
    assert clf.score(ds.X[te], ds.y[te]) >= (0.9 if C < 1 else 0.98)
