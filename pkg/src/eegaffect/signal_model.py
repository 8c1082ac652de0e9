"""EEG trial containers, canonical on-disk format, and a seeded synthetic generator.

Canonical dataset layout::

    root/
      manifest.json
      s01_t01.f32       # row-major float32 little-endian, channels x n_samples
      ...

The manifest records ``format``, ``format_version``, ``sample_rate_hz``,
``n_samples``, ``channels`` and a ``trials`` table with ``subject_id``,
``trial_id``, ``file``, ``valence``, ``arousal`` and optionally ``dominance``
and ``liking``.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .bands import BandDefinition, get_band
from .errors import (ChannelNotFound, DimensionMismatch, DuplicateTrial,
                     EmptySignal, InvalidSpec, MissingManifest,
                     NonFiniteSample, RatingOutOfRange)

FORMAT_TAG = "eeg-f32le"
FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"

DEFAULT_SAMPLE_RATE = 128.0
DEFAULT_N_SAMPLES = 8064
HIGHEST_BAND_EDGE = 30.0

SELECTED_CHANNELS = ("Fp1", "Fp2", "F3", "F4")

# DEAP preprocessed channel order
DEAP_CHANNELS = (
    "Fp1", "AF3", "F3", "F7", "FC5", "FC1", "C3", "T7", "CP5", "CP1", "P3",
    "P7", "PO3", "O1", "Oz", "Pz", "Fp2", "AF4", "Fz", "F4", "F8", "FC6",
    "FC2", "Cz", "C4", "T8", "CP6", "CP2", "P4", "P8", "PO4", "O2",
)

TEN_TWENTY_LABELS = frozenset(DEAP_CHANNELS) | frozenset((
    "Fpz", "AFz", "AF7", "AF8", "F1", "F2", "F5", "F6", "FCz", "FC3", "FC4",
    "FT7", "FT8", "C1", "C2", "C5", "C6", "CPz", "CP3", "CP4", "TP7", "TP8",
    "P1", "P2", "P5", "P6", "POz", "PO7", "PO8", "Iz", "T3", "T4", "T5", "T6",
    "A1", "A2", "M1", "M2",
))


def validate_channel_name(name: str) -> str:
    if name not in TEN_TWENTY_LABELS:
        raise InvalidSpec(f"{name!r} is not a recognised 10-20 electrode label")
    return name


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TrialRecording:
    """One subject/trial EEG segment, channels x samples, in microvolts."""

    subject_id: int
    trial_id: int
    channel_names: tuple
    data: np.ndarray
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        data = self.data if (isinstance(self.data, np.ndarray) and self.data.dtype == np.float64
                             and not self.data.flags.writeable) else _frozen(self.data)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "channel_names", tuple(self.channel_names))
        if self.subject_id < 1 or self.trial_id < 1:
            raise InvalidSpec("subject_id and trial_id must be >= 1")
        if data.ndim != 2 or data.shape[0] != len(self.channel_names):
            raise DimensionMismatch(
                f"data shape {data.shape} does not match {len(self.channel_names)} channels")
        if data.shape[1] < 2:
            raise DimensionMismatch("trials need at least 2 samples")
        if len(set(self.channel_names)) != len(self.channel_names):
            raise InvalidSpec(f"duplicate channel names in {self.channel_names}")
        for name in self.channel_names:
            validate_channel_name(name)
        if not self.sample_rate_hz > 2 * HIGHEST_BAND_EDGE:
            raise InvalidSpec(f"sample rate {self.sample_rate_hz} Hz must exceed "
                              f"{2 * HIGHEST_BAND_EDGE} Hz")
        if not np.all(np.isfinite(data)):
            raise NonFiniteSample(f"subject {self.subject_id} trial {self.trial_id} "
                                  "contains NaN or Inf samples")

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def key(self) -> tuple:
        return (self.subject_id, self.trial_id)

    @property
    def channels(self) -> dict:
        return {name: self.data[i] for i, name in enumerate(self.channel_names)}

    def channel(self, name: str) -> np.ndarray:
        try:
            return self.data[self.channel_names.index(name)]
        except ValueError:
            raise ChannelNotFound(name) from None

    def __eq__(self, other):
        if not isinstance(other, TrialRecording):
            return NotImplemented
        return (self.key == other.key and self.channel_names == other.channel_names
                and self.sample_rate_hz == other.sample_rate_hz
                and self.data.shape == other.data.shape
                and self.data.tobytes() == other.data.tobytes())

    __hash__ = None


@dataclass(frozen=True)
class Ratings:
    valence: float
    arousal: float
    dominance: float | None = None
    liking: float | None = None

    def __post_init__(self):
        for name in ("valence", "arousal", "dominance", "liking"):
            value = getattr(self, name)
            if value is None:
                continue
            value = float(value)
            object.__setattr__(self, name, value)
            if not (1.0 <= value <= 9.0):
                raise RatingOutOfRange(f"{name}={value} outside [1, 9]")

    def get(self, dimension: str) -> float:
        return getattr(self, dimension.lower())

    def to_dict(self) -> dict:
        out = {"valence": self.valence, "arousal": self.arousal}
        if self.dominance is not None:
            out["dominance"] = self.dominance
        if self.liking is not None:
            out["liking"] = self.liking
        return out


@dataclass(frozen=True)
class Dataset:
    trials: tuple
    manifest: dict = field(default_factory=dict)

    def __post_init__(self):
        trials = tuple(sorted(self.trials, key=lambda tr: tr[0].key))
        seen = set()
        for trial, ratings in trials:
            if trial.key in seen:
                raise DuplicateTrial(f"duplicate (subject_id, trial_id) {trial.key}")
            if not isinstance(ratings, Ratings):
                raise InvalidSpec(f"trial {trial.key} has no Ratings record")
            seen.add(trial.key)
        object.__setattr__(self, "trials", trials)

    def __len__(self):
        return len(self.trials)

    def __iter__(self):
        return iter(self.trials)

    @property
    def recordings(self) -> list:
        return [t for t, _ in self.trials]

    @property
    def ratings(self) -> dict:
        return {t.key: r for t, r in self.trials}


# -- ingestion ---------------------------------------------------------------

def _trial_filename(subject_id: int, trial_id: int) -> str:
    return f"s{subject_id:02d}_t{trial_id:02d}.f32"


def write_dataset(dataset: Dataset, root: str | os.PathLike, source: str | None = None) -> Path:
    """Write ``dataset`` in the canonical format. Samples are stored as float32."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    if not dataset.trials:
        raise InvalidSpec("cannot write an empty dataset")
    first = dataset.trials[0][0]
    names, n, fs = first.channel_names, first.n_samples, first.sample_rate_hz
    table = []
    for trial, ratings in dataset.trials:
        if trial.channel_names != names or trial.n_samples != n or trial.sample_rate_hz != fs:
            raise DimensionMismatch(f"trial {trial.key} differs in channels, length or rate")
        fname = _trial_filename(*trial.key)
        trial.data.astype("<f4").tofile(root / fname)
        table.append({"subject_id": trial.subject_id, "trial_id": trial.trial_id,
                      "file": fname, **ratings.to_dict()})
    manifest = {
        "format": FORMAT_TAG,
        "format_version": FORMAT_VERSION,
        "source": source or dataset.manifest.get("source", "unspecified"),
        "sample_rate_hz": fs,
        "n_samples": n,
        "channels": list(names),
        "trials": table,
    }
    with open(root / MANIFEST_NAME, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return root


def read_manifest(root: str | os.PathLike) -> dict:
    path = Path(root) / MANIFEST_NAME
    if not path.is_file():
        raise MissingManifest(f"no {MANIFEST_NAME} in {root}")
    with open(path) as fh:
        return json.load(fh)


def load_dataset(root: str | os.PathLike, expected_format: str = FORMAT_TAG,
                 baseline_s: float = 0.0, jobs: int = 1) -> Dataset:
    """Load and validate a canonical dataset directory.

    ``baseline_s`` drops that many leading seconds from every channel (e.g. 3.0
    to discard the DEAP pre-trial baseline and keep exactly 60 s).
    """
    root = Path(root)
    manifest = read_manifest(root)
    fmt = manifest.get("format")
    if fmt != expected_format or manifest.get("format_version") != FORMAT_VERSION:
        raise InvalidSpec(f"expected format {expected_format} v{FORMAT_VERSION}, "
                          f"found {fmt} v{manifest.get('format_version')}")
    fs = float(manifest["sample_rate_hz"])
    n = int(manifest["n_samples"])
    names = tuple(manifest["channels"])
    drop = int(round(baseline_s * fs))
    if drop < 0 or drop >= n - 1:
        raise InvalidSpec(f"baseline of {baseline_s} s leaves no samples")

    def read_one(row):
        path = root / row["file"]
        raw = np.fromfile(path, dtype="<f4")
        if raw.size != len(names) * n:
            raise DimensionMismatch(
                f"{row['file']}: {raw.size} samples, expected {len(names)} x {n}")
        data = raw.reshape(len(names), n).astype(np.float64)[:, drop:]
        if not np.all(np.isfinite(data)):
            raise NonFiniteSample(f"{row['file']} contains NaN or Inf samples")
        ratings = Ratings(**{k: row[k] for k in ("valence", "arousal", "dominance", "liking")
                             if row.get(k) is not None})
        trial = TrialRecording(int(row["subject_id"]), int(row["trial_id"]), names, data, fs)
        return trial, ratings

    rows = manifest["trials"]
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            trials = list(pool.map(read_one, rows))
    else:
        trials = [read_one(r) for r in rows]
    meta = {k: v for k, v in manifest.items() if k != "trials"}
    meta["baseline_s"] = baseline_s
    return Dataset(tuple(trials), meta)


# -- per-trial operations ------------------------------------------------------

def select_channels(trial: TrialRecording, wanted: Sequence[str]) -> TrialRecording:
    rows = []
    for name in wanted:
        if name not in trial.channel_names:
            raise ChannelNotFound(name)
        rows.append(trial.channel_names.index(name))
    if tuple(wanted) == trial.channel_names:
        return trial
    data = trial.data[rows]
    return TrialRecording(trial.subject_id, trial.trial_id, tuple(wanted), data,
                          trial.sample_rate_hz)


def center(signal) -> np.ndarray:
    """Subtract the arithmetic mean."""
    x = np.asarray(signal, dtype=np.float64)
    if x.size == 0:
        raise EmptySignal("cannot center an empty signal")
    return x - x.mean()


# -- synthetic EEG -------------------------------------------------------------

@dataclass(frozen=True)
class SynthComponent:
    band: str
    amplitude: float
    frequency_hz: float


@dataclass(frozen=True)
class SynthSpec:
    duration_s: float = DEFAULT_N_SAMPLES / DEFAULT_SAMPLE_RATE
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE
    components: tuple = ()
    noise_sigma: float = 0.0
    seed: int = 0
    channels: tuple = SELECTED_CHANNELS

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(
            c if isinstance(c, SynthComponent) else SynthComponent(**c) for c in self.components))
        object.__setattr__(self, "channels", tuple(self.channels))
        if self.noise_sigma < 0:
            raise InvalidSpec(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.duration_s <= 0 or self.sample_rate_hz <= 0:
            raise InvalidSpec("duration and sample rate must be positive")
        for comp in self.components:
            band: BandDefinition = get_band(comp.band)
            if not band.contains(comp.frequency_hz):
                raise InvalidSpec(f"{comp.frequency_hz} Hz is not strictly inside "
                                  f"{band.name} [{band.low_hz}, {band.high_hz}]")
            if comp.frequency_hz >= self.sample_rate_hz / 2:
                raise InvalidSpec(f"{comp.frequency_hz} Hz is above Nyquist")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.sample_rate_hz))


def synth_trial(spec: SynthSpec, subject_id: int = 1, trial_id: int = 1) -> TrialRecording:
    """Sum of sinusoids plus white Gaussian noise, reproducible from ``spec.seed``.

    Each channel draws its component phases and its noise from a generator
    keyed on ``(seed, channel index)``.
    """
    n = spec.n_samples
    t = np.arange(n) / spec.sample_rate_hz
    seed = int(spec.seed) & 0xFFFFFFFFFFFFFFFF
    data = np.zeros((len(spec.channels), n))
    for ch in range(len(spec.channels)):
        rng = np.random.default_rng([seed, ch])
        phases = rng.uniform(0.0, 2 * math.pi, size=len(spec.components))
        for comp, phase in zip(spec.components, phases):
            data[ch] += comp.amplitude * np.sin(2 * math.pi * comp.frequency_hz * t + phase)
        if spec.noise_sigma > 0:
            data[ch] += rng.normal(0.0, spec.noise_sigma, size=n)
    return TrialRecording(subject_id, trial_id, spec.channels, data, spec.sample_rate_hz)


def make_dataset(items: Sequence[tuple], manifest: Mapping | None = None) -> Dataset:
    return Dataset(tuple(items), dict(manifest or {}))
