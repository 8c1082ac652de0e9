"""Equiripple linear-phase FIR band-pass design and band decomposition.

Filters are type I (odd length, symmetric taps) and designed with the
Parks-McClellan / Remez exchange algorithm on a dense frequency grid.  The
default application mode is zero-phase forward-backward filtering with
reflection padding.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.signal import fftconvolve

from .bands import BAND_NAMES, CANONICAL_BANDS, BandDefinition, get_band
from .errors import (ConvergenceFailure, FrequencyOutOfRange, InfeasibleSpec,
                     InvalidSpec, SampleRateMismatch, SignalTooShort)
from .signal_model import TrialRecording

DEFAULT_RIPPLE_DB = 1.0
DEFAULT_ATTEN_DB = 40.0
DEFAULT_MAX_TAPS = 4001
GRID_DENSITY = 16
MAX_ITERATIONS = 100
VERIFY_MIN_POINTS = 8192
BANK_FORMAT = "eegaffect-fir-bank"


def default_transition(band: BandDefinition) -> float:
    return min(1.0, 0.5 * band.low_hz)


def ripple_to_deviation(ripple_db: float) -> float:
    """Peak-to-peak passband ripple in dB to linear deviation from unity."""
    g = 10.0 ** (ripple_db / 20.0)
    return (g - 1.0) / (g + 1.0)


def atten_to_deviation(atten_db: float) -> float:
    return 10.0 ** (-atten_db / 20.0)


@dataclass(frozen=True)
class FilterSpec:
    band: BandDefinition
    transition_hz: float | None = None
    passband_ripple_db: float = DEFAULT_RIPPLE_DB
    stopband_atten_db: float = DEFAULT_ATTEN_DB
    sample_rate_hz: float = 128.0
    max_taps: int = DEFAULT_MAX_TAPS

    def __post_init__(self):
        band = get_band(self.band)
        object.__setattr__(self, "band", band)
        if self.transition_hz is None:
            object.__setattr__(self, "transition_hz", default_transition(band))
        if self.transition_hz <= 0 or self.passband_ripple_db <= 0 or self.stopband_atten_db <= 0:
            raise InvalidSpec("transition, ripple and attenuation must be positive")
        nyq = self.sample_rate_hz / 2
        # a lower stop edge of exactly 0 Hz leaves a DC-only lower stopband
        if not (0 <= band.low_hz - self.transition_hz and band.high_hz + self.transition_hz < nyq):
            raise InvalidSpec(f"{band.name}: edges +/- {self.transition_hz} Hz leave [0, {nyq}) Hz")

    @property
    def edges_hz(self) -> tuple:
        b, tw = self.band, self.transition_hz
        return (b.low_hz - tw, b.low_hz, b.high_hz, b.high_hz + tw)

    @property
    def passband_deviation(self) -> float:
        return ripple_to_deviation(self.passband_ripple_db)

    @property
    def stopband_deviation(self) -> float:
        return atten_to_deviation(self.stopband_atten_db)

    def to_dict(self) -> dict:
        return {"band": {"name": self.band.name, "low_hz": self.band.low_hz,
                         "high_hz": self.band.high_hz},
                "transition_hz": self.transition_hz,
                "passband_ripple_db": self.passband_ripple_db,
                "stopband_atten_db": self.stopband_atten_db,
                "sample_rate_hz": self.sample_rate_hz,
                "max_taps": self.max_taps}

    @classmethod
    def from_dict(cls, d: dict) -> "FilterSpec":
        d = dict(d)
        d["band"] = BandDefinition(**d["band"])
        return cls(**d)


@dataclass(frozen=True, eq=False)
class FirCoefficients:
    taps: np.ndarray
    design_spec: FilterSpec | None = None
    passband_deviation: float = float("nan")
    stopband_deviation: float = float("nan")
    iterations: int = 0

    def __post_init__(self):
        taps = np.array(self.taps, dtype=np.float64)
        if taps.ndim != 1 or taps.size == 0:
            raise InvalidSpec("taps must be a non-empty vector")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    @property
    def numtaps(self) -> int:
        return self.taps.size

    @property
    def sample_rate_hz(self) -> float:
        return self.design_spec.sample_rate_hz if self.design_spec else 2.0

    @property
    def band(self) -> BandDefinition | None:
        return self.design_spec.band if self.design_spec else None

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(self.taps - self.taps[::-1]) <= tol))


@dataclass(frozen=True, eq=False)
class BandSignal:
    channel: str
    band: BandDefinition
    samples: np.ndarray = field(repr=False)


# -- Remez exchange ------------------------------------------------------------

def _dense_grid(bands, desired, weight, n_uniform):
    """Uniform grid ``j / (2 * n_uniform)`` restricted to the bands, plus exact edges.

    Returns frequencies, targets, weights, band index per point, and the
    uniform index of each point (-1 for off-grid edge points).
    """
    step = 0.5 / n_uniform
    f, dv, wv, seg, uidx = [], [], [], [], []
    for i, ((lo, hi), d, w) in enumerate(zip(bands, desired, weight)):
        j = np.arange(int(math.ceil(lo / step)), int(math.floor(hi / step)) + 1)
        pts, idx = j * step, j.copy()
        if pts.size == 0 or pts[0] > lo:
            pts, idx = np.concatenate([[lo], pts]), np.concatenate([[-1], idx])
        if pts[-1] < hi:
            pts, idx = np.concatenate([pts, [hi]]), np.concatenate([idx, [-1]])
        f.append(pts)
        uidx.append(idx)
        dv.append(np.full(pts.size, d, dtype=float))
        wv.append(np.full(pts.size, w, dtype=float))
        seg.append(np.full(pts.size, i))
    return tuple(np.concatenate(v) for v in (f, dv, wv, seg, uidx))


def _barycentric_weights(x: np.ndarray) -> tuple:
    """log|w_k| and sign(w_k) for w_k = 1 / prod_{j != k} (x_k - x_j).

    Kept in log form: for clustered nodes the weights span far more than the
    double-precision exponent range.
    """
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    logw = -np.sum(np.log(np.abs(diff)), axis=1)
    neg = np.sum(diff < 0, axis=1)
    return logw, np.where(neg % 2 == 0, 1.0, -1.0)


def _barycentric_eval(nodes, values, weights, x, chunk=2048) -> np.ndarray:
    logw, sign = weights
    out = np.empty_like(x)
    for start in range(0, x.size, chunk):
        xs = x[start:start + chunk]
        diff = xs[:, None] - nodes[None, :]
        hit_r, hit_c = np.nonzero(diff == 0.0)
        diff[hit_r, hit_c] = 1.0
        lg = logw[None, :] - np.log(np.abs(diff))
        lg -= lg.max(axis=1, keepdims=True)
        c = np.exp(lg) * sign * np.sign(diff)
        res = (c @ values) / c.sum(axis=1)
        res[hit_r] = values[hit_c]
        out[start:start + chunk] = res
    return out


def _select_extrema(err, seg, threshold, count, keep=None):
    """Indices of ``count`` alternating extrema of ``err`` with |err| >= threshold.

    Points in ``keep`` (the previous reference set) always qualify.
    """
    mag = np.abs(err)
    ok = mag >= threshold
    if keep is not None:
        ok[keep] = True
    sgn = np.sign(err)
    cand = []
    i, n = 0, err.size
    while i < n:
        if not ok[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and ok[j + 1] and sgn[j + 1] == sgn[i] and seg[j + 1] == seg[i]:
            j += 1
        cand.append(i + int(np.argmax(mag[i:j + 1])))
        i = j + 1
    # merge neighbours of equal sign (they may straddle a band gap)
    merged = []
    for idx in cand:
        if merged and sgn[merged[-1]] == sgn[idx]:
            if mag[idx] > mag[merged[-1]]:
                merged[-1] = idx
        else:
            merged.append(idx)
    # drop the weakest extremum; an interior removal also merges its two
    # same-signed neighbours so alternation survives
    while len(merged) > count:
        vals = mag[merged]
        i = int(np.argmin(vals))
        if i in (0, len(merged) - 1) or len(merged) - count == 1:
            if i not in (0, len(merged) - 1):
                i = 0 if vals[0] <= vals[-1] else len(merged) - 1
            merged.pop(i)
        else:
            left, right = merged[i - 1], merged[i + 1]
            keep_idx = left if mag[left] >= mag[right] else right
            merged[i - 1:i + 2] = [keep_idx]
    return np.array(merged, dtype=np.intp)


def remez_type1(numtaps: int, bands: Sequence[tuple], desired: Sequence[float],
                weight: Sequence[float], grid_density: int = GRID_DENSITY,
                maxiter: int = MAX_ITERATIONS, rtol: float = 1e-6):
    """Minimax type I FIR for piecewise-constant targets.

    ``bands`` are (low, high) pairs in cycles/sample within [0, 0.5].
    Returns ``(taps, delta, iterations)`` where ``delta`` is the weighted
    equiripple error.
    """
    if numtaps < 3 or numtaps % 2 == 0:
        raise InvalidSpec(f"type I filters need an odd length >= 3, got {numtaps}")
    m = (numtaps - 1) // 2
    r = m + 1
    n_uniform = grid_density * numtaps
    f, d, w, seg, _ = _dense_grid(bands, desired, weight, n_uniform)
    if f.size < 2 * (r + 1):
        raise InfeasibleSpec("frequency grid too coarse for the requested length")
    x = np.cos(2 * np.pi * f)
    ext = np.round(np.linspace(0, f.size - 1, r + 1)).astype(np.intp)
    alt = np.where(np.arange(r + 1) % 2 == 0, 1.0, -1.0)

    for it in range(1, maxiter + 1):
        nodes = x[ext]
        bw = _barycentric_weights(nodes)
        scaled = bw[1] * np.exp(bw[0] - bw[0].max())
        delta = np.dot(scaled, d[ext]) / np.dot(scaled, alt / w[ext])
        # with this delta the r + 1 values lie on a degree r - 1 polynomial,
        # so interpolating through all of them needs no extrapolation
        vals = d[ext] - alt * delta / w[ext]
        err = w * (d - _barycentric_eval(nodes, vals, bw, x))
        if not np.all(np.isfinite(err)):
            raise ConvergenceFailure(f"non-finite error at iteration {it}")
        emax = np.max(np.abs(err))
        if emax - abs(delta) <= rtol * abs(delta):
            break
        new_ext = _select_extrema(err, seg, abs(delta), r + 1, keep=ext)
        if new_ext.size < r + 1:
            raise ConvergenceFailure(
                f"lost alternation at iteration {it}: {new_ext.size} of {r + 1} extrema")
        if np.array_equal(new_ext, ext):
            break
        ext = new_ext
    else:
        raise ConvergenceFailure(f"Remez exchange did not settle in {maxiter} iterations")

    # frequency-sample the amplitude response and invert the cosine series
    k = np.arange(r)
    amp = _barycentric_eval(nodes, vals, bw, np.cos(2 * np.pi * k / numtaps))
    basis = np.cos(2 * np.pi * np.outer(k, k[1:]) / numtaps)
    half = (amp[0] + 2.0 * basis @ amp[1:]) / numtaps
    taps = np.concatenate([half[:0:-1], half])
    return taps, abs(float(delta)), it


def estimate_numtaps(spec: FilterSpec) -> int:
    """Herrmann's length estimate using the narrowest transition band."""
    dp, ds = spec.passband_deviation, spec.stopband_deviation
    lp, ls = math.log10(dp), math.log10(ds)
    dinf = ((0.005309 * lp ** 2 + 0.07114 * lp - 0.4761) * ls
            - (0.00266 * lp ** 2 + 0.5941 * lp + 0.4278))
    fk = 11.01217 + 0.51244 * (lp - ls)
    df = spec.transition_hz / spec.sample_rate_hz
    n = int(math.ceil(dinf / df - fk * df + 1))
    return n + 1 if n % 2 == 0 else max(n, 3)


def verification_grid(spec: FilterSpec, numtaps: int, min_points: int = VERIFY_MIN_POINTS):
    """Dense grid over [0, fs/2] (at least 16 points per tap) plus all band edges."""
    nyq = spec.sample_rate_hz / 2
    n = max(min_points, GRID_DENSITY * numtaps)
    f = np.union1d(np.linspace(0.0, nyq, n), np.array(spec.edges_hz))
    s1, p1, p2, s2 = spec.edges_hz
    stop = (f <= s1) | (f >= s2)
    pas = (f >= p1) & (f <= p2)
    return f, pas, stop


def measure_response(coeffs: FirCoefficients, spec: FilterSpec,
                     min_points: int = VERIFY_MIN_POINTS) -> dict:
    """Passband min/max gain and stopband max gain on the verification grid."""
    f, pas, stop = verification_grid(spec, coeffs.numtaps, min_points)
    mag = freq_response(coeffs, f, sample_rate_hz=spec.sample_rate_hz)
    return {"pass_min": float(mag[pas].min()), "pass_max": float(mag[pas].max()),
            "stop_max": float(mag[stop].max())}


def meets_spec(coeffs: FirCoefficients, spec: FilterSpec,
               min_points: int = VERIFY_MIN_POINTS) -> bool:
    """Peak-to-peak passband ripple and stopband gain within the FilterSpec targets."""
    m = measure_response(coeffs, spec, min_points)
    ripple_db = 20 * math.log10(m["pass_max"] / m["pass_min"])
    return ripple_db <= spec.passband_ripple_db and m["stop_max"] <= spec.stopband_deviation


def design_bandpass(spec: FilterSpec) -> FirCoefficients:
    """Shortest equiripple band-pass, grown from the Herrmann estimate, whose
    dense-grid response meets the ripple and attenuation targets.

    Taps are scaled so the largest passband gain is exactly one; the ripple
    then lies entirely below 0 dB.
    """
    fs = spec.sample_rate_hz
    s1, p1, p2, s2 = (e / fs for e in spec.edges_hz)
    dp, ds = spec.passband_deviation, spec.stopband_deviation
    bands = [(0.0, s1), (p1, p2), (s2, 0.5)]
    numtaps = estimate_numtaps(spec)
    if numtaps > spec.max_taps:
        raise InfeasibleSpec(f"estimated length {numtaps} exceeds cap {spec.max_taps}")
    while numtaps <= spec.max_taps:
        taps, _, iters = remez_type1(numtaps, bands, [0.0, 1.0, 0.0], [dp / ds, 1.0, dp / ds])
        m = measure_response(FirCoefficients(taps, spec), spec)
        coeffs = FirCoefficients(taps / m["pass_max"], spec,
                                 1.0 - m["pass_min"] / m["pass_max"],
                                 m["stop_max"] / m["pass_max"], iters)
        if meets_spec(coeffs, spec):
            return coeffs
        numtaps += 2 * max(1, numtaps // 100)
    raise InfeasibleSpec(f"{spec.band.name}: no design within {spec.max_taps} taps")


@lru_cache(maxsize=64)
def _cached_design(spec: FilterSpec) -> FirCoefficients:
    return design_bandpass(spec)


def design_filter_bank(sample_rate_hz: float = 128.0, bands: Iterable = BAND_NAMES,
                       overrides: dict | None = None) -> list:
    """One filter per band, in the order given.

    ``overrides`` may hold ``transition_hz``, ``passband_ripple_db``,
    ``stopband_atten_db`` and ``max_taps``, either flat or keyed by band name.
    """
    overrides = overrides or {}
    bank = []
    for b in bands:
        band = get_band(b)
        kw = {k: v for k, v in overrides.items() if k not in CANONICAL_BANDS}
        kw.update(overrides.get(band.name, {}))
        bank.append(_cached_design(FilterSpec(band, sample_rate_hz=sample_rate_hz, **kw)))
    return bank


# -- evaluation and application ---------------------------------------------------

def freq_response(coeffs: FirCoefficients, freqs_hz, sample_rate_hz: float | None = None) -> np.ndarray:
    """|sum_n h[n] exp(-j 2 pi f n / fs)| at each requested frequency."""
    fs = sample_rate_hz if sample_rate_hz is not None else coeffs.sample_rate_hz
    f = np.atleast_1d(np.asarray(freqs_hz, dtype=np.float64))
    if np.any(f < 0) or np.any(f > fs / 2):
        raise FrequencyOutOfRange(f"frequencies must lie in [0, {fs / 2}] Hz")
    h = coeffs.taps
    n = np.arange(h.size)
    out = np.empty(f.size)
    for start in range(0, f.size, 2048):
        ph = 2 * np.pi * np.outer(f[start:start + 2048] / fs, n)
        out[start:start + 2048] = np.hypot(np.cos(ph) @ h, np.sin(ph) @ h)
    return out


def filter_signal(coeffs: FirCoefficients, signal, mode: str = "zero_phase") -> np.ndarray:
    """Apply an FIR filter, returning an output of the same length.

    ``zero_phase`` runs the filter forward and backward over a signal padded
    by ``L`` reflected samples at each end.  ``causal`` is plain convolution
    from rest; its first ``L - 1`` outputs are edge transient (see
    :func:`edge_transient`) and the output lags by ``(L - 1) / 2`` samples.
    """
    x = np.asarray(signal, dtype=np.float64)
    h = coeffs.taps
    L = h.size
    if x.ndim != 1 or x.size <= L:
        raise SignalTooShort(f"signal of length {x.size} must be longer than {L} taps")
    if mode == "zero_phase":
        xp = np.pad(x, L, mode="reflect")
        g = np.convolve(h, h[::-1])
        y = fftconvolve(xp, g, mode="valid")
        return y[1:x.size + 1]
    if mode == "causal":
        return fftconvolve(x, h)[:x.size]
    raise InvalidSpec(f"unknown filter mode {mode!r}")


def edge_transient(coeffs: FirCoefficients, mode: str = "zero_phase") -> int:
    """Number of leading output samples affected by start-up transient."""
    return 0 if mode == "zero_phase" else coeffs.numtaps - 1


def extract_bands(trial: TrialRecording, bank: Sequence[FirCoefficients],
                  mode: str = "zero_phase") -> dict:
    """Filter every channel through every band filter.

    Returns ``{(channel, band_name): BandSignal}`` ordered channel-major.
    """
    for c in bank:
        if c.design_spec is None or c.sample_rate_hz != trial.sample_rate_hz:
            raise SampleRateMismatch(
                f"filter designed for {c.sample_rate_hz} Hz, trial sampled at "
                f"{trial.sample_rate_hz} Hz")
    out = {}
    for name, samples in zip(trial.channel_names, trial.data):
        for c in bank:
            y = filter_signal(c, samples, mode)
            y.setflags(write=False)
            out[(name, c.band.name)] = BandSignal(name, c.band, y)
    return out


# -- bank serialisation -------------------------------------------------------

def _fmt17(v: float) -> str:
    return format(float(v), ".17g")


def bank_to_json(bank: Sequence[FirCoefficients]) -> str:
    """JSON text with taps written as 17-significant-digit decimals."""
    parts = []
    for c in bank:
        meta = {"spec": c.design_spec.to_dict() if c.design_spec else None,
                "numtaps": c.numtaps,
                "passband_deviation": c.passband_deviation,
                "stopband_deviation": c.stopband_deviation,
                "iterations": c.iterations}
        body = json.dumps(meta, indent=6)[:-1].rstrip()
        taps = ", ".join(_fmt17(t) for t in c.taps)
        parts.append(f"    {body.strip()},\n      \"taps\": [{taps}]\n    }}")
    return ("{\n  \"format\": \"%s\",\n  \"format_version\": 1,\n  \"filters\": [\n%s\n  ]\n}\n"
            % (BANK_FORMAT, ",\n".join(parts)))


def bank_from_json(text: str) -> list:
    doc = json.loads(text)
    if doc.get("format") != BANK_FORMAT:
        raise InvalidSpec(f"not a filter bank document: {doc.get('format')!r}")
    bank = []
    for item in doc["filters"]:
        spec = FilterSpec.from_dict(item["spec"]) if item.get("spec") else None
        bank.append(FirCoefficients(np.array(item["taps"], dtype=np.float64), spec,
                                    item.get("passband_deviation", float("nan")),
                                    item.get("stopband_deviation", float("nan")),
                                    item.get("iterations", 0)))
    return bank
