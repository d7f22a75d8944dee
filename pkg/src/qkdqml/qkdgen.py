"""Gaussian-modulated CV-QKD link statistics, attack injectors and block features.

Bob's homodyne outcome is ``y = sqrt(eta*T) * x + z`` with
``x ~ N(0, V_A*N0)`` and ``z ~ N(0, N0 + v_el*N0 + eta*T*eps*N0)``.  An attack
scenario perturbs the samples, the LO intensity or the reported shot-noise
variance.  Each block yields the features
``(mean, variance, lo_intensity, shot_noise, entropy, range)``.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .preprocessing import FEATURE_NAMES, apply_standardizer, fit_standardizer  # noqa: F401

CSV_HEADER = ("label",) + FEATURE_NAMES
ENTROPY_BINS = 30
LO_METER_REL_NOISE = 0.005

KNOWN_CLASSES = ("NA", "HA", "LA", "CA", "SA", "BA")
UNKNOWN_CLASSES = ("NA", "U1", "U2", "U3", "U4", "U5")
SCENARIO_IDS = {name: i for i, name in enumerate(KNOWN_CLASSES + UNKNOWN_CLASSES[1:])}


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class LinkParams:
    V_A: float = 4.0
    T: float = 0.5
    eta: float = 0.6
    v_el: float = 0.01
    eps: float = 0.01
    N0_nominal: float = 1.0
    I_lo_nominal: float = 1.0
    kappa: float = 1.0

    def __post_init__(self):
        for name, val in asdict(self).items():
            if not val > 0:
                raise ScenarioError(f"link parameter {name} must be positive, got {val}")
        if self.T > 1 or self.eta > 1:
            raise ScenarioError("T and eta must not exceed 1")

    def variance_y(self, N0: float | None = None) -> float:
        """Closed-form variance of Bob's outcome at shot-noise variance ``N0``."""
        N0 = self.N0_nominal if N0 is None else N0
        gain = self.eta * self.T
        return gain * (self.V_A * N0 + self.eps * N0) + N0 + self.v_el * N0


@dataclass(frozen=True)
class AttackScenario:
    """An attack class and the parameter ranges its injector draws from per block.

    ``kind`` lists injector families applied in order (``LA``, ``CA``, ``SA``,
    ``HA``); an empty tuple is the identity (no attack).  Range parameters:

    - ``lo_scale``: LO intensity factor u (LA)
    - ``cal_scale``: reported shot-noise factor c (CA)
    - ``sat_shift``: displacement in units of sqrt(V_y) (SA)
    - ``sat_clip``: clipping bound in units of nominal sqrt(V_y) (SA)
    - ``blind_weight``: control-light weight w (HA)
    - ``blind_offset``: constant output in units of sqrt(V_y) (HA)
    """

    name: str
    kind: tuple = ()
    lo_scale: tuple = (0.6, 0.9)
    cal_scale: tuple = (0.7, 0.9)
    sat_shift: tuple = (2.0, 4.0)
    sat_clip: float = 3.0
    blind_weight: tuple = (0.5, 0.9)
    blind_offset: float = 1.5

    def __post_init__(self):
        object.__setattr__(self, "kind", tuple(self.kind))
        for k in self.kind:
            if k not in ("LA", "CA", "SA", "HA"):
                raise ScenarioError(f"{self.name}: unknown injector family {k!r}")
        for key in ("lo_scale", "cal_scale", "sat_shift", "blind_weight"):
            lo, hi = getattr(self, key)
            object.__setattr__(self, key, (float(lo), float(hi)))
            if not 0 <= lo <= hi:
                raise ScenarioError(f"{self.name}: invalid range {key}=({lo}, {hi})")
        if not 0 < self.lo_scale[0] or self.cal_scale[0] <= 0:
            raise ScenarioError(f"{self.name}: scale factors must be positive")
        if self.blind_weight[1] > 1:
            raise ScenarioError(f"{self.name}: blind_weight must lie in [0, 1]")
        if self.sat_clip <= 0:
            raise ScenarioError(f"{self.name}: sat_clip must be positive")


def default_scenarios() -> dict[str, AttackScenario]:
    return {
        "NA": AttackScenario("NA"),
        "HA": AttackScenario("HA", ("HA",)),
        "LA": AttackScenario("LA", ("LA",)),
        "CA": AttackScenario("CA", ("CA",)),
        "SA": AttackScenario("SA", ("SA",)),
        "BA": AttackScenario("BA", ("LA", "CA")),
        # out-of-range draws of known families, plus one novel composition
        "U1": AttackScenario("U1", ("LA",), lo_scale=(0.3, 0.5)),
        "U2": AttackScenario("U2", ("CA",), cal_scale=(0.4, 0.6)),
        "U3": AttackScenario("U3", ("SA",), sat_shift=(0.5, 1.5)),
        "U4": AttackScenario("U4", ("HA",), blind_weight=(0.2, 0.4)),
        "U5": AttackScenario("U5", ("SA", "LA")),
    }


@dataclass
class BlockSamples:
    y: np.ndarray
    I_lo: float
    N_0: float


def block_rng(seed: int, class_id: int, block_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(class_id), int(block_index)]))


def simulate_block(link: LinkParams, scenario: AttackScenario, g: int,
                   rng: np.random.Generator) -> BlockSamples:
    """Draw one block of ``g`` homodyne outcomes under ``scenario``."""
    if g < 2:
        raise ScenarioError(f"block size must be at least 2, got {g}")
    u = rng.uniform(*scenario.lo_scale) if "LA" in scenario.kind else 1.0
    c = rng.uniform(*scenario.cal_scale) if "CA" in scenario.kind else 1.0
    shift = rng.uniform(*scenario.sat_shift) if "SA" in scenario.kind else 0.0
    w = rng.uniform(*scenario.blind_weight) if "HA" in scenario.kind else 0.0
    meter = 1.0 + LO_METER_REL_NOISE * rng.standard_normal()

    I_lo_true = u * link.I_lo_nominal
    N0 = link.N0_nominal * u
    gain = link.eta * link.T
    x = rng.normal(0.0, math.sqrt(link.V_A * N0), g)
    z = rng.normal(0.0, math.sqrt(N0 + link.v_el * N0 + gain * link.eps * N0), g)
    y = math.sqrt(gain) * x + z

    sigma_nominal = math.sqrt(link.variance_y())
    for family in scenario.kind:
        if family == "SA":
            bound = scenario.sat_clip * sigma_nominal
            y = np.clip(y + shift * sigma_nominal, -bound, bound)
        elif family == "HA":
            y = (1.0 - w) * y + w * scenario.blind_offset * sigma_nominal

    I_lo = I_lo_true * meter
    # shot-noise monitor tracks the LO; CA corrupts the reported reference
    N_0 = c * link.kappa * I_lo
    return BlockSamples(y, float(I_lo), float(N_0))


def histogram_entropy(y: np.ndarray, bins: int = ENTROPY_BINS) -> float:
    lo, hi = float(np.min(y)), float(np.max(y))
    if hi <= lo:
        return 0.0
    counts, _ = np.histogram(y, bins=bins, range=(lo, hi))
    p = counts[counts > 0] / counts.sum()
    return float(max(0.0, -np.sum(p * np.log(p))))


def extract_features(b: BlockSamples) -> np.ndarray:
    y = np.asarray(b.y, dtype=float)
    spread = y.max() - y.min()
    return np.array([
        y.mean(),
        # exact zero for constant blocks, where the mean carries rounding error
        y.var(ddof=1) if spread > 0 else 0.0,
        b.I_lo,
        b.N_0,
        histogram_entropy(y),
        spread,
    ])


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    class_names: tuple
    manifest: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.y)

    def to_csv(self, path) -> None:
        Path(path).write_text(self.csv_text())

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for label, row in zip(self.y, self.X):
            w.writerow([self.class_names[label]] + [repr(float(v)) for v in row])
        return buf.getvalue()

    def write(self, path) -> Path:
        """Write the CSV plus ``<stem>.manifest.json`` next to it."""
        path = Path(path)
        text = self.csv_text()
        path.write_text(text)
        manifest = dict(self.manifest, csv_sha256=hashlib.sha256(text.encode()).hexdigest())
        mpath = path.with_suffix(".manifest.json")
        mpath.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
        return mpath

    @classmethod
    def read_csv(cls, path, class_names=None) -> "Dataset":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or tuple(rows[0]) != CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}")
        labels = [r[0] for r in rows[1:]]
        if class_names is None:
            seen = []
            for name in labels:
                if name not in seen:
                    seen.append(name)
            class_names = tuple(seen)
        index = {n: i for i, n in enumerate(class_names)}
        X = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=float)
        y = np.array([index[n] for n in labels], dtype=int)
        manifest = {}
        mpath = Path(path).with_suffix(".manifest.json")
        if mpath.exists():
            manifest = json.loads(mpath.read_text())
        return cls(X.reshape(-1, len(FEATURE_NAMES)), y, tuple(class_names), manifest)


def generate_dataset(link: LinkParams, scenarios, blocks_per_class: int = 100,
                     g: int = 1000, seed: int = 0) -> Dataset:
    """Simulate ``blocks_per_class`` blocks for each scenario, in the given order."""
    scenarios = list(scenarios)
    if len(scenarios) < 2:
        raise ScenarioError("need at least two scenarios")
    if blocks_per_class < 10:
        raise ScenarioError(f"blocks per class must be at least 10, got {blocks_per_class}")
    names = tuple(s.name for s in scenarios)
    if len(set(names)) != len(names):
        raise ScenarioError(f"duplicate scenario names in {names}")
    rows, labels = [], []
    for label, sc in enumerate(scenarios):
        class_id = SCENARIO_IDS.get(sc.name, 1000 + label)
        for b in range(blocks_per_class):
            block = simulate_block(link, sc, g, block_rng(seed, class_id, b))
            rows.append(extract_features(block))
            labels.append(label)
    manifest = {
        "seed": int(seed),
        "blocks_per_class": int(blocks_per_class),
        "block_size": int(g),
        "link": asdict(link),
        "scenarios": [asdict(s) for s in scenarios],
        "entropy_bins": ENTROPY_BINS,
        "lo_meter_rel_noise": LO_METER_REL_NOISE,
    }
    return Dataset(np.array(rows), np.array(labels, dtype=int), names, manifest)


def known_attack_dataset(seed: int = 0, blocks_per_class: int = 100, g: int = 1000,
                         link: LinkParams | None = None) -> Dataset:
    sc = default_scenarios()
    return generate_dataset(link or LinkParams(), [sc[n] for n in KNOWN_CLASSES],
                            blocks_per_class, g, seed)


def unknown_attack_dataset(seed: int = 0, blocks_per_class: int = 100, g: int = 1000,
                           link: LinkParams | None = None) -> Dataset:
    sc = default_scenarios()
    return generate_dataset(link or LinkParams(), [sc[n] for n in UNKNOWN_CLASSES],
                            blocks_per_class, g, seed)
