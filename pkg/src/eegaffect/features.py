"""Statistical, spectral-power and higher-order-crossing feature extraction.

Every extractor returns a :class:`FeatureVector` whose ``layout`` names each
value as ``(channel, band_or_None, feature)``.  Header strings use the dotted
form ``Fp1.alpha.sigma``, ``Fp2.time.afd`` or ``F3.hoc.D4``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .bands import BAND_NAMES
from .errors import (DegenerateSignal, InvalidSpec,
                     LayoutMismatch, MissingBandSignal, NonFiniteSample,
                     SignalTooShort, ZeroPowerBand)
from .signal_model import SELECTED_CHANNELS, TrialRecording

METHODS = ("stats_time", "stats_band", "spd", "hoc")
STAT_NAMES = ("mu", "sigma", "afd", "afd_norm", "asd", "asd_norm")
DEFAULT_HOC_ORDER = 6

# band slot used in header strings for band-less methods
_SLOT = {"stats_time": "time", "hoc": "hoc"}


class StatFeatures(NamedTuple):
    mu: float
    sigma: float
    afd: float
    afd_norm: float
    asd: float
    asd_norm: float


@dataclass(frozen=True, eq=False)
class FeatureVector:
    method: str
    values: np.ndarray
    layout: tuple

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidSpec(f"unknown feature method {self.method!r}")
        values = np.array(self.values, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "layout", tuple(tuple(d) for d in self.layout))
        if values.ndim != 1 or values.size != len(self.layout):
            raise LayoutMismatch(f"{values.size} values for {len(self.layout)} descriptors")

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return (self.method == other.method and self.layout == other.layout
                and self.values.tobytes() == other.values.tobytes())

    __hash__ = None

    @property
    def names(self) -> list:
        return [descriptor_name(self.method, d) for d in self.layout]

    def select(self, bands: Iterable[str] | None = None,
               features: Iterable[str] | None = None,
               channels: Iterable[str] | None = None) -> "FeatureVector":
        """Sub-vector restricted to the given bands, feature names and channels."""
        bands = None if bands is None else set(bands)
        features = None if features is None else set(features)
        channels = None if channels is None else set(channels)
        keep = [i for i, (ch, band, name) in enumerate(self.layout)
                if (bands is None or band in bands)
                and (features is None or name in features)
                and (channels is None or ch in channels)]
        if not keep:
            raise LayoutMismatch("selection leaves no features")
        return FeatureVector(self.method, self.values[keep], [self.layout[i] for i in keep])


def descriptor_name(method: str, descriptor: tuple) -> str:
    ch, band, name = descriptor
    return f"{ch}.{band if band is not None else _SLOT[method]}.{name}"


def parse_descriptor(text: str) -> tuple:
    ch, slot, name = text.split(".")
    return (ch, None if slot in ("time", "hoc") else slot, name)


def layout_for(method: str, channels: Sequence[str] = SELECTED_CHANNELS,
               bands: Sequence[str] = BAND_NAMES, order: int = DEFAULT_HOC_ORDER) -> tuple:
    if method == "stats_time":
        return tuple((ch, None, s) for ch in channels for s in STAT_NAMES)
    if method == "stats_band":
        return tuple((ch, b, s) for ch in channels for b in bands for s in STAT_NAMES)
    if method == "spd":
        return tuple((ch, b, "spd") for ch in channels for b in bands)
    if method == "hoc":
        return tuple((ch, None, f"D{k}") for ch in channels for k in range(1, order + 1))
    raise InvalidSpec(f"unknown feature method {method!r}")


# -- statistics ---------------------------------------------------------------

def _as_signal(signal, min_len: int) -> np.ndarray:
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1 or x.size < min_len:
        raise SignalTooShort(f"need at least {min_len} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteSample("signal contains NaN or Inf")
    return x


def stat_features(signal) -> StatFeatures:
    """Mean, population std, mean |first difference|, mean |x[t+2] - x[t]|,
    and the two differences divided by the std."""
    x = _as_signal(signal, 3)
    mu = x.mean()
    sigma = x.std()
    if sigma == 0.0:
        raise DegenerateSignal()
    afd = np.abs(x[1:] - x[:-1]).mean()
    asd = np.abs(x[2:] - x[:-2]).mean()
    return StatFeatures(float(mu), float(sigma), float(afd), float(afd / sigma),
                        float(asd), float(asd / sigma))


def time_stat_vector(trial: TrialRecording,
                     channels: Sequence[str] = SELECTED_CHANNELS) -> FeatureVector:
    values = []
    for ch in channels:
        try:
            values.extend(stat_features(trial.channel(ch)))
        except DegenerateSignal:
            raise DegenerateSignal(channel=ch) from None
    return FeatureVector("stats_time", values, layout_for("stats_time", channels))


def _band_lookup(bands: Mapping, ch: str, band: str) -> np.ndarray:
    try:
        entry = bands[(ch, band)]
    except KeyError:
        raise MissingBandSignal(f"no band signal for ({ch}, {band})") from None
    return getattr(entry, "samples", entry)


def band_stat_vector(bands: Mapping, channels: Sequence[str] = SELECTED_CHANNELS,
                     band_order: Sequence[str] = BAND_NAMES) -> FeatureVector:
    values = []
    for ch in channels:
        for b in band_order:
            try:
                values.extend(stat_features(_band_lookup(bands, ch, b)))
            except DegenerateSignal:
                raise DegenerateSignal(channel=ch, band=b) from None
    return FeatureVector("stats_band", values, layout_for("stats_band", channels, band_order))


# -- spectral power -----------------------------------------------------------

def band_log_power(samples) -> float:
    """log10 of the mean squared amplitude."""
    x = _as_signal(samples, 1)
    power = np.mean(x * x)
    if power == 0.0:
        raise ZeroPowerBand("band signal is identically zero")
    return float(np.log10(power))


def spd_vector(bands: Mapping, channels: Sequence[str] = SELECTED_CHANNELS,
               band_order: Sequence[str] = BAND_NAMES) -> FeatureVector:
    values = []
    for ch in channels:
        for b in band_order:
            try:
                values.append(band_log_power(_band_lookup(bands, ch, b)))
            except ZeroPowerBand:
                raise ZeroPowerBand(f"{ch}.{b}: band signal is identically zero") from None
    return FeatureVector("spd", values, layout_for("spd", channels, band_order))


# -- higher order crossings ---------------------------------------------------

def difference_series(signal, k: int) -> np.ndarray:
    """Apply the backward difference k - 1 times along the last axis."""
    x = np.asarray(signal, dtype=np.float64)
    if k < 1:
        raise InvalidSpec(f"order must be >= 1, got {k}")
    if x.shape[-1] < k:
        raise SignalTooShort(f"order {k} needs at least {k} samples")
    return np.diff(x, n=k - 1, axis=-1) if k > 1 else x.copy()


def count_zero_crossings(signal) -> np.ndarray | int:
    """Symbol changes in the clipped series (sample >= 0 -> 1, else 0)."""
    x = np.asarray(signal)
    if x.shape[-1] < 2:
        raise SignalTooShort("need at least 2 samples to count crossings")
    b = x >= 0
    n = np.count_nonzero(b[..., 1:] != b[..., :-1], axis=-1)
    return int(n) if np.ndim(n) == 0 else n


def hoc_sequence(signal, max_order: int = DEFAULT_HOC_ORDER) -> np.ndarray:
    """Zero-crossing counts D_1..D_K of the centered signal after 0..K-1 differences.

    Accepts a batch of signals along the leading axes.
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.shape[-1] < max_order + 1:
        raise SignalTooShort(f"order {max_order} needs at least {max_order + 1} samples")
    if not np.all(np.isfinite(x)):
        raise NonFiniteSample("signal contains NaN or Inf")
    z = x - x.mean(axis=-1, keepdims=True)
    out = np.empty(x.shape[:-1] + (max_order,), dtype=np.int64)
    for k in range(1, max_order + 1):
        out[..., k - 1] = count_zero_crossings(z)
        z = z[..., 1:] - z[..., :-1]
    return out


def hoc_vector(trial: TrialRecording, max_order: int = DEFAULT_HOC_ORDER,
               channels: Sequence[str] = SELECTED_CHANNELS) -> FeatureVector:
    values = []
    for ch in channels:
        values.extend(hoc_sequence(trial.channel(ch), max_order).astype(np.float64))
    return FeatureVector("hoc", values, layout_for("hoc", channels, order=max_order))


# -- per-trial dispatch ---------------------------------------------------------

def extract(method: str, trial: TrialRecording, bands: Mapping | None = None,
            channels: Sequence[str] = SELECTED_CHANNELS,
            hoc_order: int = DEFAULT_HOC_ORDER) -> FeatureVector:
    if method == "stats_time":
        return time_stat_vector(trial, channels)
    if method == "hoc":
        return hoc_vector(trial, hoc_order, channels)
    if bands is None:
        raise MissingBandSignal(f"method {method} needs band signals")
    if method == "stats_band":
        return band_stat_vector(bands, channels)
    if method == "spd":
        return spd_vector(bands, channels)
    raise InvalidSpec(f"unknown feature method {method!r}")


# -- CSV ----------------------------------------------------------------------

def write_feature_csv(rows: Sequence[tuple], fh) -> None:
    """``rows`` are ``((subject_id, trial_id), FeatureVector)`` pairs sharing one layout."""
    if not rows:
        raise LayoutMismatch("no feature rows to write")
    first = rows[0][1]
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["subject_id", "trial_id", *first.names])
    for key, fv in rows:
        if fv.layout != first.layout or fv.method != first.method:
            raise LayoutMismatch(f"row {key} has a different layout")
        writer.writerow([key[0], key[1], *(repr(float(v)) for v in fv.values)])


def read_feature_csv(fh, method: str) -> list:
    reader = csv.reader(fh)
    header = next(reader)
    if header[:2] != ["subject_id", "trial_id"]:
        raise LayoutMismatch("feature CSV must start with subject_id, trial_id")
    layout = [parse_descriptor(h) for h in header[2:]]
    out = []
    for row in reader:
        key = (int(row[0]), int(row[1]))
        out.append((key, FeatureVector(method, [float(v) for v in row[2:]], layout)))
    return out


def feature_csv_text(rows: Sequence[tuple]) -> str:
    buf = io.StringIO()
    write_feature_csv(rows, buf)
    return buf.getvalue()
