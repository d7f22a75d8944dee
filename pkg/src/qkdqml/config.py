"""Flat key-value experiment configs with section headers (INI dialect).

Example::

    [dataset]
    kind = known            ; or unknown, or custom (uses `scenarios`)
    blocks_per_class = 100
    block_size = 1000
    seed = 0

    [model]
    family = qsvm
    variant = AnRx
    C = 1.0

    [backend]
    name = none

    [split]
    mode = holdout
    test_ratio = 0.3

    [scenario.U6]           ; extra scenario, referenced from [dataset] scenarios
    kind = LA, CA
    lo_scale = 0.2, 0.3
"""
from __future__ import annotations

import configparser
import hashlib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .featuremap import VARIANTS
from .qkdgen import KNOWN_CLASSES, UNKNOWN_CLASSES, AttackScenario, LinkParams, ScenarioError, default_scenarios

FAMILIES = ("qsvm", "qnn")
SPLIT_MODES = ("holdout", "kfold")


class ConfigError(ValueError):
    """Invalid or inconsistent configuration; the message names the field."""


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "known"
    scenarios: tuple = KNOWN_CLASSES
    blocks_per_class: int = 100
    block_size: int = 1000
    seed: int = 0
    link: LinkParams = field(default_factory=LinkParams)
    path: str | None = None


@dataclass(frozen=True)
class ModelSpec:
    family: str = "qsvm"
    variant: str = "AnRx"
    C: float = 1.0
    psd_repair: bool = True
    n_layers: int = 3
    initial_lr: float = 1e-3
    batch_size: int = 16
    max_epochs: int = 100
    early_stop_patience: int = 10
    lr_patience: int = 5
    lr_factor: float = 0.5
    min_lr: float = 1e-6


@dataclass(frozen=True)
class SplitSpec:
    mode: str = "holdout"
    test_ratio: float = 0.3
    k: int = 5
    stratify: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    model: ModelSpec = field(default_factory=ModelSpec)
    backend: str = "none"
    backend_file: str | None = None
    bench_backends: tuple = ("none", "LNRM", "MNSTM", "HNAM")
    split: SplitSpec = field(default_factory=SplitSpec)
    out: str = "out"
    custom_scenarios: dict = field(default_factory=dict)
    seed: int = 0

    def scenario_objects(self) -> list:
        table = dict(default_scenarios(), **self.custom_scenarios)
        return [table[name] for name in self.dataset.scenarios]

    def canonical(self) -> str:
        """Stable text form; its hash goes into every manifest.

        The output directory is excluded so reruns elsewhere hash the same.
        """
        doc = asdict(self)
        del doc["out"]
        doc["custom_scenarios"] = {k: asdict(v) for k, v in sorted(self.custom_scenarios.items())}
        return repr(sorted(_flatten(doc).items()))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _flatten(doc, prefix=""):
    out = {}
    for k, v in doc.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _coerce(section: str, key: str, raw: str, like):
    where = f"[{section}] {key}"
    try:
        if isinstance(like, bool):
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(like, int):
            val = int(raw)
            if val < 0:
                raise ValueError(raw)
            return val
        if isinstance(like, float):
            return float(raw)
        if isinstance(like, tuple):
            return tuple(t.strip() for t in raw.split(",") if t.strip())
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {type(like).__name__}") from None
    return raw.strip()


def _fill(cls, section: str, items: dict, base=None):
    obj = base if base is not None else cls()
    known = {f.name: f for f in fields(cls)}
    updates = {}
    for key, raw in items.items():
        if key not in known:
            raise ConfigError(f"[{section}] {key}: unknown field")
        updates[key] = _coerce(section, key, raw, getattr(obj, key))
    return replace(obj, **updates)


_RANGE_KEYS = ("lo_scale", "cal_scale", "sat_shift", "blind_weight")


def _scenario(name: str, items: dict) -> AttackScenario:
    kw = {}
    for key, raw in items.items():
        where = f"[scenario.{name}] {key}"
        if key == "kind":
            kw[key] = tuple(t.strip() for t in raw.split(",") if t.strip())
        elif key in _RANGE_KEYS:
            parts = [p.strip() for p in raw.split(",")]
            try:
                kw[key] = (float(parts[0]), float(parts[1]))
            except (ValueError, IndexError):
                raise ConfigError(f"{where}: expected two comma-separated numbers") from None
            if len(parts) != 2:
                raise ConfigError(f"{where}: expected two comma-separated numbers")
        elif key in ("sat_clip", "blind_offset"):
            try:
                kw[key] = float(raw)
            except ValueError:
                raise ConfigError(f"{where}: cannot parse {raw!r} as float") from None
        else:
            raise ConfigError(f"{where}: unknown field")
    try:
        return AttackScenario(name, **kw)
    except ScenarioError as exc:
        raise ConfigError(f"[scenario.{name}]: {exc}") from None


def parse_config(text: str, base_dir: Path | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str  # keep key case (C, V_A, ...)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None

    cfg = ExperimentConfig()
    custom = {}
    for sec in cp.sections():
        if sec.startswith("scenario."):
            name = sec.split(".", 1)[1]
            custom[name] = _scenario(name, dict(cp[sec]))

    dataset = cfg.dataset
    link = dataset.link
    model, split = cfg.model, cfg.split
    top = {}
    for sec in cp.sections():
        items = dict(cp[sec])
        if sec == "dataset":
            link_keys = {f.name for f in fields(LinkParams)}
            link_items = {k: v for k, v in items.items() if k in link_keys}
            rest = {k: v for k, v in items.items() if k not in link_keys}
            if link_items:
                try:
                    link = _fill(LinkParams, sec, link_items)
                except ScenarioError as exc:
                    raise ConfigError(f"[dataset]: {exc}") from None
            dataset = _fill(DatasetSpec, sec, {k: v for k, v in rest.items() if k != "link"})
        elif sec == "model":
            model = _fill(ModelSpec, sec, items)
        elif sec == "split":
            split = _fill(SplitSpec, sec, items)
        elif sec == "backend":
            for key, raw in items.items():
                if key == "name":
                    top["backend"] = raw.strip()
                elif key == "file":
                    top["backend_file"] = raw.strip()
                elif key == "bench":
                    top["bench_backends"] = tuple(t.strip() for t in raw.split(",") if t.strip())
                else:
                    raise ConfigError(f"[backend] {key}: unknown field")
        elif sec == "output":
            for key, raw in items.items():
                if key != "dir":
                    raise ConfigError(f"[output] {key}: unknown field")
                top["out"] = raw.strip()
        elif not sec.startswith("scenario."):
            raise ConfigError(f"[{sec}]: unknown section")

    explicit = cp.has_section("dataset") and "scenarios" in cp["dataset"]
    if dataset.kind == "known" and not explicit:
        dataset = replace(dataset, scenarios=KNOWN_CLASSES)
    elif dataset.kind == "unknown" and not explicit:
        dataset = replace(dataset, scenarios=UNKNOWN_CLASSES)
    elif dataset.kind not in ("known", "unknown", "custom"):
        raise ConfigError(f"[dataset] kind: expected known, unknown or custom, got {dataset.kind!r}")
    elif dataset.kind == "custom" and not explicit:
        raise ConfigError("[dataset] scenarios: required when kind = custom")
    if base_dir is not None:
        if dataset.path and not Path(dataset.path).is_absolute():
            dataset = replace(dataset, path=str(base_dir / dataset.path))
        if top.get("backend_file") and not Path(top["backend_file"]).is_absolute():
            top["backend_file"] = str(base_dir / top["backend_file"])
    cfg = replace(cfg, dataset=replace(dataset, link=link), model=model, split=split,
                  custom_scenarios=custom, seed=dataset.seed, **top)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    table = dict(default_scenarios(), **cfg.custom_scenarios)
    for name in cfg.dataset.scenarios:
        if name not in table:
            raise ConfigError(f"[dataset] scenarios: unknown scenario {name!r}")
    if len(cfg.dataset.scenarios) < 2:
        raise ConfigError("[dataset] scenarios: need at least two")
    if cfg.dataset.blocks_per_class < 10:
        raise ConfigError("[dataset] blocks_per_class: must be at least 10")
    if cfg.dataset.block_size < 2:
        raise ConfigError("[dataset] block_size: must be at least 2")
    m = cfg.model
    if m.family not in FAMILIES:
        raise ConfigError(f"[model] family: expected one of {FAMILIES}, got {m.family!r}")
    if m.variant not in VARIANTS:
        raise ConfigError(f"[model] variant: expected one of {VARIANTS}, got {m.variant!r}")
    if not m.C > 0:
        raise ConfigError("[model] C: must be positive")
    for key in ("n_layers", "batch_size", "max_epochs", "early_stop_patience", "lr_patience"):
        if getattr(m, key) < 1:
            raise ConfigError(f"[model] {key}: must be at least 1")
    if not 0 < m.min_lr <= m.initial_lr:
        raise ConfigError("[model] min_lr: must satisfy 0 < min_lr <= initial_lr")
    if not 0 < m.lr_factor < 1:
        raise ConfigError("[model] lr_factor: must lie in (0, 1)")
    s = cfg.split
    if s.mode not in SPLIT_MODES:
        raise ConfigError(f"[split] mode: expected one of {SPLIT_MODES}, got {s.mode!r}")
    if not 0 < s.test_ratio < 1:
        raise ConfigError("[split] test_ratio: must lie in (0, 1)")
    if s.k < 2:
        raise ConfigError("[split] k: must be at least 2")
    if cfg.dataset.path and not Path(cfg.dataset.path).exists():
        raise ConfigError(f"[dataset] path: file {cfg.dataset.path!r} does not exist")
    if cfg.backend_file and not Path(cfg.backend_file).exists():
        raise ConfigError(f"[backend] file: {cfg.backend_file!r} does not exist")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {str(path)!r} does not exist")
    return parse_config(path.read_text(), base_dir=path.parent)
