"""YAML pipeline configuration.

Every key has a default, so an empty file is a valid config.  ``resolved()``
returns the complete mapping with defaults filled in; that mapping is echoed
into every report and round-trips through ``dump_config``/``load_config``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from .bands import BAND_NAMES
from .classifiers import RANDOM_FOREST, SVM, TrainConfig
from .errors import ConfigError, EegAffectError
from .features import DEFAULT_HOC_ORDER, METHODS
from .fir_filter import (DEFAULT_ATTEN_DB, DEFAULT_MAX_TAPS, DEFAULT_RIPPLE_DB)
from .signal_model import FORMAT_TAG, SELECTED_CHANNELS, validate_channel_name

SCHEMES = ("bipartition", "tripartition")
DIMENSIONS = ("arousal", "valence")
CLASSIFIERS = (SVM, RANDOM_FOREST)
FILTER_MODES = ("zero_phase", "causal")

# per-classifier keys that make sense in a config file
_TRAIN_KEYS = {SVM: ("C", "max_epochs", "tol"),
               RANDOM_FOREST: ("n_trees", "mtry", "min_leaf", "bootstrap")}


def _default_classifiers() -> dict:
    base = TrainConfig()
    return {kind: {k: getattr(base, k) for k in keys} for kind, keys in _TRAIN_KEYS.items()}


@dataclass(frozen=True)
class PipelineConfig:
    dataset: str = "data"
    dataset_format: str = FORMAT_TAG
    baseline_s: float = 0.0
    channels: tuple = SELECTED_CHANNELS
    bands: tuple = BAND_NAMES
    filter_mode: str = "zero_phase"
    filter_overrides: dict = field(default_factory=dict)
    passband_ripple_db: float = DEFAULT_RIPPLE_DB
    stopband_atten_db: float = DEFAULT_ATTEN_DB
    max_taps: int = DEFAULT_MAX_TAPS
    methods: tuple = METHODS
    hoc_order: int = DEFAULT_HOC_ORDER
    schemes: tuple = SCHEMES
    dimensions: tuple = DIMENSIONS
    contiguous_boundaries: bool = False
    classifiers: dict = field(default_factory=_default_classifiers)
    folds: int = 10
    fold_seed: int = 0
    grouped_folds: bool = False
    seed: int = 0
    jobs: int = 1
    histogram_bins: int = 20
    output: str = "out"

    def __post_init__(self):
        for name in ("channels", "bands", "methods", "schemes", "dimensions"):
            value = getattr(self, name)
            if isinstance(value, str) or not hasattr(value, "__iter__"):
                raise ConfigError(f"{name} must be a list")
            object.__setattr__(self, name, tuple(value))
        _check_subset("methods", self.methods, METHODS)
        _check_subset("schemes", self.schemes, SCHEMES)
        _check_subset("dimensions", self.dimensions, DIMENSIONS)
        _check_subset("bands", self.bands, BAND_NAMES)
        _check_subset("classifiers", tuple(self.classifiers), CLASSIFIERS)
        try:
            for ch in self.channels:
                validate_channel_name(ch)
        except EegAffectError as exc:
            raise ConfigError(str(exc)) from None
        if self.filter_mode not in FILTER_MODES:
            raise ConfigError(f"filter_mode must be one of {FILTER_MODES}")
        for name in ("folds", "jobs", "histogram_bins", "hoc_order", "max_taps"):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.folds < 2 or self.histogram_bins < 2:
            raise ConfigError("folds and histogram_bins must be at least 2")
        if self.baseline_s < 0:
            raise ConfigError("baseline_s must be >= 0")
        merged = {}
        for kind, params in self.classifiers.items():
            params = dict(params or {})
            unknown = set(params) - set(_TRAIN_KEYS[kind])
            if unknown:
                raise ConfigError(f"unknown {kind} settings: {sorted(unknown)}")
            full = {**_default_classifiers()[kind], **params}
            try:
                self.train_config(kind, 0, full)
            except EegAffectError as exc:
                raise ConfigError(f"{kind}: {exc}") from None
            merged[kind] = full
        object.__setattr__(self, "classifiers",
                           {k: merged[k] for k in CLASSIFIERS if k in merged})

    def train_config(self, kind: str, seed: int, params: dict | None = None) -> TrainConfig:
        params = self.classifiers[kind] if params is None else params
        return TrainConfig(kind=kind, seed=seed, **params)

    def filter_spec_overrides(self) -> dict:
        return {"passband_ripple_db": self.passband_ripple_db,
                "stopband_atten_db": self.stopband_atten_db,
                "max_taps": self.max_taps, **self.filter_overrides}

    def resolved(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    def with_overrides(self, **kw) -> "PipelineConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def _check_subset(name, values, allowed):
    if not values:
        raise ConfigError(f"{name} must not be empty")
    bad = [v for v in values if v not in allowed]
    if bad:
        raise ConfigError(f"{name}: {bad} not in {list(allowed)}")
    if len(set(values)) != len(values):
        raise ConfigError(f"{name} lists a value twice")


def config_from_dict(d: dict | None) -> PipelineConfig:
    d = dict(d or {})
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return PipelineConfig(**d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(data)


def dump_config(cfg: PipelineConfig) -> str:
    return yaml.safe_dump(cfg.resolved(), sort_keys=False, default_flow_style=False)
