"""Quantum-kernel SVM and variational QNN attack detection for CV-QKD links."""
from __future__ import annotations

from .evalkit import confusion_matrix, kfold, metrics_report, split
from .featuremap import VARIANTS, build_encoding_circuit, encode
from .mcsvm import QuantumKernelSVC, SvmModel
from .noise import derive_channel_params, preset_backend
from .preprocessing import Standardizer
from .qkdgen import known_attack_dataset, unknown_attack_dataset
from .qkernel import gram_matrix, kernel_value
from .qnn import QNNClassifier, QnnModel

__version__ = "0.1.0"

__all__ = [
    "VARIANTS",
    "QNNClassifier",
    "QnnModel",
    "QuantumKernelSVC",
    "Standardizer",
    "SvmModel",
    "build_encoding_circuit",
    "confusion_matrix",
    "derive_channel_params",
    "encode",
    "gram_matrix",
    "kernel_value",
    "kfold",
    "known_attack_dataset",
    "metrics_report",
    "preset_backend",
    "split",
    "unknown_attack_dataset",
]
