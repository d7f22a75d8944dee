"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line."""
from __future__ import annotations

import math
import time
import warnings

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from qkdqml.cli import bench_noise, main
from qkdqml.config import ExperimentConfig
from qkdqml.evalkit import evaluate, split
from qkdqml.featuremap import VARIANTS
from qkdqml.mcsvm import BinaryDual, argmax_lowest, dual_objective, scores_from_kernel, train_ovr
from qkdqml.noise import HardwareMetrics, derive_channel_params, kraus
from qkdqml.qkdgen import known_attack_dataset, unknown_attack_dataset
from qkdqml.qkernel import circuit_kernel_value, cross_kernel, gram_matrix, kernel_value
from qkdqml.qnn import QNNClassifier, build_ansatz, cross_entropy, forward_batch, loss_and_grad

from oracles import (
    bias_from_kkt,
    central_difference,
    closed_form_state,
    dual_value,
    fidelity,
    kraus_sum,
    projected_gradient_dual,
    svm_corpus,
)

# hardware rows: (T1 us, T2 us, eps1, eps_m) -> published (adc, pdc, dpc)
HARDWARE_ROWS = {
    "ibm_aachen": ((217, 184, 2.19e-4, 8.55e-3), (4.61e-4, 6.26e-4, 3.29e-4)),
    "ibm_marrakesh": ((204, 97.2, 3.48e-4, 8.55e-3), (4.90e-4, 1.57e-3, 5.22e-4)),
    "ibm_torino": ((172, 136, 3.09e-4, 2.25e-2), (5.81e-4, 8.89e-4, 4.64e-4)),
    "Willow": ((73, 80, 6.20e-4, 8.00e-3), (1.37e-3, 1.13e-3, 9.30e-4)),
    "Garnet": ((40.1, 9.03, 8.00e-4, 3.20e-2), (2.49e-3, 1.95e-2, 1.20e-3)),
    "Ankaa-3": ((33, 20, 8.00e-4, 3.50e-2), (3.03e-3, 6.95e-3, 1.20e-3)),
    "LNRM": ((10, 10, 6.00e-3, 6.75e-2), (9.95e-3, 9.95e-3, 9.00e-3)),
}

ANR = ("AnRx", "AnRy", "AnRz")
NOISE_LEVELS = ("none", "LNRM", "MNSTM", "HNAM")

# QNN runs for the known-attack criterion: (variant, n_layers, initial_lr)
QNN_RUNS = (("IQPl", 3, 1e-3), ("AnRx", 3, 1e-3))


def record(number: int, title: str, ok: bool, detail: str, elapsed: float) -> None:
    line = f"[acceptance] {number} {title}: {'PASS' if ok else 'FAIL'} ({detail}; {elapsed:.1f} s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def agrees3(derived: float, published: float) -> bool:
    half_unit = 0.5 * 10 ** (math.floor(math.log10(abs(published))) - 2)
    return abs(derived - published) <= half_unit * (1 + 1e-9)


@pytest.fixture(scope="module")
def known():
    return known_attack_dataset(seed=0)


def test_1_channel_parameter_rows():
    t = time.perf_counter()
    bad = []
    for name, (metrics, published) in HARDWARE_ROWS.items():
        b = derive_channel_params(HardwareMetrics(*metrics))
        for got, want in zip((b.delta_adc, b.delta_pdc, b.delta_dpc), published):
            if not agrees3(got, want):
                bad.append((name, got, want))
    dt = time.perf_counter() - t
    record(1, "hardware rows to 3 s.f.", not bad and dt < 1, f"{len(HARDWARE_ROWS)} rows, mismatches {bad}", dt)


def test_2_angle_kernels_equivalent():
    t = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(500):
        a, b = rng.uniform(-math.pi, math.pi, (2, 6))
        vals = [kernel_value(v, a, b) for v in ANR]
        worst = max(worst, max(vals) - min(vals))
    dt = time.perf_counter() - t
    record(2, "angle kernel equivalence", worst < 1e-9 and dt < 10, f"max spread {worst:.2e}", dt)


def test_3_circuit_kernel_oracle():
    t = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 0.0
    for v in VARIANTS:
        for _ in range(200):
            a, b = rng.uniform(-2, 2, (2, 6))
            direct = fidelity(closed_form_state(v, a), closed_form_state(v, b))
            worst = max(worst, abs(circuit_kernel_value(v, a, b) - direct),
                        abs(kernel_value(v, a, b) - direct))
    dt = time.perf_counter() - t
    record(3, "compute-uncompute kernel", worst < 1e-10 and dt < 60, f"max deviation {worst:.2e}", dt)


def test_4_cptp_suite():
    t = time.perf_counter()
    rng = np.random.default_rng(4)
    worst = 0.0
    for p, q in rng.uniform(0, 1, (1000, 2)):
        for label, args in (("BFC", (p,)), ("ADC", (p,)), ("PDC", (p,)), ("DPC", (p,)), ("AP", (p, q))):
            worst = max(worst, np.max(np.abs(kraus_sum(kraus(label, *args).operators) - np.eye(2))))
    dt = time.perf_counter() - t
    record(4, "CPTP suite", worst < 1e-12, f"max |sum M'M - I| {worst:.2e}", dt)


def test_5_parameter_shift_gradients():
    t = time.perf_counter()
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 5))
        layers = int(rng.integers(1, 4))
        k = int(rng.integers(2, n + 1))
        variant = VARIANTS[int(rng.integers(len(VARIANTS)))]
        a = build_ansatz(n, layers)
        params = rng.uniform(-math.pi, math.pi, a.n_params)
        m = int(rng.integers(1, 4))
        X, labels = rng.normal(size=(m, n)), rng.integers(0, k, m)

        def loss(p):
            return float(np.mean(cross_entropy(forward_batch(a, variant, p, X, k), labels)))

        grad = loss_and_grad(a, variant, params, X, labels, k)[1]
        worst = max(worst, float(np.max(np.abs(grad - central_difference(loss, params)))))
    dt = time.perf_counter() - t
    record(5, "parameter-shift gradients", worst < 1e-6 and dt < 120, f"max deviation {worst:.2e}", dt)


def test_6_svm_matches_qp_oracle():
    t = time.perf_counter()
    worst, mismatched, count = 0.0, 0, 0
    for variant, X, labels, X_test, C in svm_corpus():
        if len(X) > 10:
            continue
        count += 1
        K = gram_matrix(variant, X).entries
        Kt = cross_kernel(variant, X, X_test)
        duals = train_ovr(K, labels, C)
        oracle = []
        for s, dual in enumerate(duals):
            y = np.where(labels == s, 1.0, -1.0)
            a = projected_gradient_dual(K, y, C)
            worst = max(worst, abs(dual_value(a, K, y) - dual_objective(dual.alphas, K, y)))
            oracle.append(BinaryDual(a, bias_from_kkt(a, K, y, C), y))
        ours = argmax_lowest(scores_from_kernel(duals, Kt))
        ref = argmax_lowest(scores_from_kernel(oracle, Kt))
        mismatched += int(not np.array_equal(ours, ref))
    dt = time.perf_counter() - t
    record(6, "SVM vs QP oracle", worst < 1e-4 and mismatched == 0,
           f"{count} instances, max dual gap {worst:.2e}, prediction mismatches {mismatched}", dt)


def test_7_known_attack_detection(known):
    t = time.perf_counter()
    cfg = ExperimentConfig()
    qsvm = {r["variant"]: r["test_accuracy"] for r in bench_noise(cfg, known, ["none"], ANR)}
    tr, te = split(known.y, 0.3, seed=0)
    qnn = {}
    for variant, layers, lr in QNN_RUNS:
        clf = QNNClassifier(variant, n_layers=layers, initial_lr=lr, seed=0)
        clf.fit(known.X[tr], known.y[tr], known.X[te], known.y[te])
        qnn[f"{variant}/L{layers}"] = clf.score(known.X[te], known.y[te])
    dt = time.perf_counter() - t
    best = max(qnn, key=qnn.get)
    ok = min(qsvm.values()) >= 0.98 and qnn[best] >= 0.95 and dt < 600
    detail = (", ".join(f"{v} {a:.4f}" for v, a in qsvm.items())
              + f"; best QNN {best} {qnn[best]:.4f} of "
              + ", ".join(f"{v} {a:.4f}" for v, a in qnn.items()))
    record(7, "known attacks, noiseless", ok, detail, dt)


def test_8_unknown_attack_detection():
    t = time.perf_counter()
    ds = unknown_attack_dataset(seed=0)
    qsvm = {r["variant"]: r["test_accuracy"] for r in bench_noise(ExperimentConfig(), ds, ["none"], ANR)}
    dt = time.perf_counter() - t
    record(8, "unknown attacks, noiseless", min(qsvm.values()) >= 0.98,
           ", ".join(f"{v} {a:.4f}" for v, a in qsvm.items()), dt)


def test_9_noise_robustness_trend(known):
    t = time.perf_counter()
    cfg = ExperimentConfig()
    acc = {}
    for r in bench_noise(cfg, known, NOISE_LEVELS, ["AnRx"]):
        acc[("AnRx", r["backend"])] = r["test_accuracy"]
    for r in bench_noise(cfg, known, NOISE_LEVELS[1:], ["AnRy", "AnRz"]):
        acc[(r["variant"], r["backend"])] = r["test_accuracy"]
    dt = time.perf_counter() - t
    trend = [acc[("AnRx", b)] for b in NOISE_LEVELS]
    monotone = all(a >= b for a, b in zip(trend, trend[1:]))
    grid = {key: val for key, val in acc.items() if key[1] != "none"}
    target = acc[("AnRz", "HNAM")]
    # no cell of the grid may score below AnRz/HNAM; equal cells are reported
    worst = target <= min(grid.values())
    tied = sorted(f"{v}/{b}" for (v, b), a in grid.items() if a == target and (v, b) != ("AnRz", "HNAM"))
    ok = monotone and trend[-1] >= 0.80 and worst and dt < 1800
    detail = ("AnRx " + " >= ".join(f"{b} {a:.4f}" for b, a in zip(NOISE_LEVELS, trend))
              + f"; AnRz/HNAM {target:.4f}, grid min {min(grid.values()):.4f}, tied with {tied or 'none'}")
    record(9, "noise robustness trend", ok, detail, dt)


def test_10_metric_identities():
    t = time.perf_counter()
    rng = np.random.default_rng(10)
    failures = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for _ in range(1000):
            k = int(rng.integers(2, 8))
            n = int(rng.integers(1, 200))
            r = evaluate(rng.integers(0, k, n), rng.integers(0, k, n), k)
            same = r.micro["precision"] == r.micro["recall"] == r.micro["f1"] == r.accuracy
            failures += int(not (same and r.weighted["recall"] == r.accuracy))
    dt = time.perf_counter() - t
    record(10, "metric identities", failures == 0, f"1000 prediction sets, {failures} violations", dt)


SMALL = """
[dataset]
blocks_per_class = 10
block_size = 200
seed = 11

[model]
variant = {variant}
family = {family}
n_layers = 1
max_epochs = 2

[backend]
bench = none, LNRM
"""


def test_11_determinism(tmp_path):
    t = time.perf_counter()
    runs = [
        ("gen", None),
        ("train", ("IQPl", "qsvm")),
        ("eval", ("IQPl", "qsvm")),
        ("kernel-dump", ("AnRz", "qsvm")),
        ("bench-noise", ("AnRx", "qsvm")),
        ("train", ("AnRy", "qnn")),
    ]
    differing, codes = [], []
    for i, (command, model) in enumerate(runs):
        outs = []
        for rep in ("a", "b"):
            out = tmp_path / f"{i}{rep}"
            argv = [command, "--out", str(out)]
            if model:
                cfg = tmp_path / f"{i}.ini"
                cfg.write_text(SMALL.format(variant=model[0], family=model[1]))
                argv += ["--config", str(cfg)]
                if command == "eval":
                    codes.append(main(["train", "--config", str(cfg), "--out", str(out)]))
            codes.append(main(argv))
            outs.append(out)
        for f in sorted(outs[0].iterdir()):
            if f.suffix in (".csv", ".json") and f.read_bytes() != (outs[1] / f.name).read_bytes():
                differing.append(f"{command}:{f.name}")
    dt = time.perf_counter() - t
    ok = not differing and all(c == 0 for c in codes)
    record(11, "byte-identical reruns", ok, f"{len(runs)} commands, differing {differing}, exit codes {set(codes)}", dt)
