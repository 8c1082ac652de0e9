import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from eegaffect.bands import BAND_NAMES
from eegaffect.errors import (DegenerateSignal, LayoutMismatch, MissingBandSignal,
                              SignalTooShort, ZeroPowerBand)
from eegaffect.features import (FeatureVector, band_stat_vector, count_zero_crossings,
                                difference_series, extract, feature_csv_text, hoc_sequence,
                                hoc_vector, layout_for, read_feature_csv, spd_vector,
                                stat_features, time_stat_vector)
from eegaffect.fir_filter import extract_bands
from eegaffect.signal_model import (SELECTED_CHANNELS, SynthComponent, SynthSpec,
                                    TrialRecording, synth_trial)
from oracles import binomial_difference, naive_hoc, naive_stats

CH = SELECTED_CHANNELS


def trial_from(rows, n=None):
    rows = np.asarray(rows, dtype=float)
    return TrialRecording(1, 1, CH[:rows.shape[0]], rows)


# -- statistics -----------------------------------------------------------------

def test_alternating_signal_stats():
    assert stat_features([0, 1, 0, 1, 0, 1]) == (0.5, 0.5, 1.0, 2.0, 0.0, 0.0)


def test_ramp_stats():
    s = stat_features([0, 1, 2, 3, 4])
    assert (s.mu, s.afd, s.asd) == (2.0, 1.0, 2.0)


def test_constant_is_degenerate():
    with pytest.raises(DegenerateSignal):
        stat_features([5, 5, 5])


def test_too_short_for_stats():
    with pytest.raises(SignalTooShort):
        stat_features([1, 2])


def test_stats_match_oracle_on_random_signals():
    rng = np.random.default_rng(0)
    for _ in range(200):
        x = rng.normal(rng.uniform(-50, 50), rng.uniform(0.1, 30), rng.integers(3, 400))
        np.testing.assert_allclose(stat_features(x), naive_stats(x), rtol=1e-12, atol=0)


def test_time_vector_layout_and_identical_channels():
    x = np.random.default_rng(1).normal(size=100)
    fv = time_stat_vector(trial_from([x] * 4))
    assert len(fv) == 24
    assert fv.names[:7] == ["Fp1.time.mu", "Fp1.time.sigma", "Fp1.time.afd",
                            "Fp1.time.afd_norm", "Fp1.time.asd", "Fp1.time.asd_norm",
                            "Fp2.time.mu"]
    blocks = fv.values.reshape(4, 6)
    assert all(np.array_equal(blocks[0], b) for b in blocks)


def test_time_vector_matches_oracle():
    t = synth_trial(SynthSpec(duration_s=8, noise_sigma=5, seed=3,
                              components=(SynthComponent("alpha", 10, 9.5),)))
    fv = time_stat_vector(t)
    expect = np.concatenate([naive_stats(t.channel(c)) for c in CH])
    np.testing.assert_allclose(fv.values, expect, rtol=1e-12)


def test_constant_channel_names_channel():
    rows = np.random.default_rng(2).normal(size=(4, 50))
    rows[0] = 3.0
    with pytest.raises(DegenerateSignal) as e:
        time_stat_vector(trial_from(rows))
    assert e.value.channel == "Fp1"


@pytest.fixture(scope="module")
def synth_bands(default_bank):
    t = synth_trial(SynthSpec(duration_s=20, noise_sigma=5, seed=9,
                              components=(SynthComponent("beta", 8, 20),)))
    return extract_bands(t, default_bank)


def test_band_vector_matches_oracle(synth_bands):
    fv = band_stat_vector(synth_bands)
    assert len(fv) == 96
    expect = np.concatenate([naive_stats(synth_bands[(c, b)].samples)
                             for c in CH for b in BAND_NAMES])
    np.testing.assert_allclose(fv.values, expect, rtol=1e-12)
    assert fv.layout[6] == ("Fp1", "beta", "mu")


def test_band_vector_insertion_order_irrelevant(synth_bands):
    shuffled = dict(reversed(list(synth_bands.items())))
    assert band_stat_vector(shuffled) == band_stat_vector(synth_bands)


def test_band_vector_zero_bands_degenerate():
    zero = {(c, b): np.zeros(50) for c in CH for b in BAND_NAMES}
    with pytest.raises(DegenerateSignal):
        band_stat_vector(zero)


def test_band_vector_missing_entry(synth_bands):
    partial = dict(synth_bands)
    del partial[("F4", "theta")]
    with pytest.raises(MissingBandSignal):
        band_stat_vector(partial)


# -- SPD ----------------------------------------------------------------------

def test_spd_sine_closed_form():
    A = 7.0
    t = np.arange(8064) / 128.0
    s = A * np.sin(2 * np.pi * 10 * t + 0.3)
    bands = {(c, b): s for c in CH for b in BAND_NAMES}
    np.testing.assert_allclose(spd_vector(bands).values, math.log10(A * A / 2), atol=1e-3)


def test_spd_ones_is_zero():
    bands = {(c, b): np.ones(10) for c in CH for b in BAND_NAMES}
    fv = spd_vector(bands)
    assert len(fv) == 16 and not fv.values.any()
    assert fv.names[:5] == ["Fp1.alpha.spd", "Fp1.beta.spd", "Fp1.delta.spd",
                            "Fp1.theta.spd", "Fp2.alpha.spd"]


def test_spd_zero_band():
    bands = {(c, b): np.ones(10) for c in CH for b in BAND_NAMES}
    bands[("F3", "delta")] = np.zeros(10)
    with pytest.raises(ZeroPowerBand):
        spd_vector(bands)


@given(st.floats(1e-3, 1e3), st.integers(0, 2 ** 32 - 1))
def test_spd_scaling_shift(a, seed):
    rng = np.random.default_rng(seed)
    bands = {(c, b): rng.normal(size=64) for c in CH for b in BAND_NAMES}
    scaled = {k: a * v for k, v in bands.items()}
    np.testing.assert_allclose(spd_vector(scaled).values - spd_vector(bands).values,
                               2 * math.log10(a), atol=1e-12)


# -- HOC ----------------------------------------------------------------------

def test_difference_series_examples():
    x = np.random.default_rng(0).normal(size=20)
    np.testing.assert_array_equal(difference_series(x, 1), x)
    np.testing.assert_array_equal(difference_series([1, 4, 9, 16], 2), [3, 5, 7])
    np.testing.assert_allclose(difference_series(x, 4), binomial_difference(x, 4), rtol=1e-12,
                               atol=1e-12)
    with pytest.raises(SignalTooShort):
        difference_series([1, 2], 3)


def test_count_zero_crossings_examples():
    assert count_zero_crossings([1, -1, 1, -1, 1]) == 4
    assert count_zero_crossings([1, 1, 1]) == 0
    assert count_zero_crossings([0, -1]) == 1
    with pytest.raises(SignalTooShort):
        count_zero_crossings([1])


def test_hoc_examples():
    alt = np.tile([1.0, -1.0], 5)
    assert hoc_sequence(alt, 6)[0] == 9
    assert not hoc_sequence(np.full(20, 3.3), 6).any()


def test_hoc_matches_oracle_on_noise():
    rng = np.random.default_rng(12)
    for _ in range(500):
        x = rng.normal(size=256)
        assert hoc_sequence(x, 6).tolist() == naive_hoc(x, 6)


def test_hoc_batched_equals_per_row():
    X = np.random.default_rng(4).normal(size=(7, 100))
    batch = hoc_sequence(X, 6)
    for row, out in zip(X, batch):
        assert out.tolist() == hoc_sequence(row, 6).tolist()


@given(arrays(np.float64, st.integers(7, 120), elements=st.floats(-1e3, 1e3)))
def test_hoc_bounds(x):
    d = hoc_sequence(x, 6)
    assert np.all(d >= 0)
    assert np.all(d <= x.size - np.arange(1, 7))


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([0.5, 2.0, 4.0, 1024.0]),
       st.sampled_from([-8.0, 0.0, 0.25, 64.0]))
def test_hoc_scale_and_shift_invariant(seed, a, c):
    # power-of-two scales and dyadic shifts keep every step exact in floating point
    x = np.round(np.random.default_rng(seed).normal(size=128) * 64) / 64
    ref = hoc_sequence(x, 6)
    assert hoc_sequence(a * x, 6).tolist() == ref.tolist()
    assert hoc_sequence(x + c, 6).tolist() == ref.tolist()


@given(st.integers(0, 2 ** 32 - 1), st.floats(1e-3, 1e3))
def test_normalized_stats_scale_invariant(seed, a):
    x = np.random.default_rng(seed).normal(size=200)
    s, t = stat_features(x), stat_features(a * x)
    assert t.afd_norm == pytest.approx(s.afd_norm, rel=1e-12)
    assert t.asd_norm == pytest.approx(s.asd_norm, rel=1e-12)


def test_hoc_mean_nondecreasing_in_order():
    X = np.random.default_rng(21).normal(size=(250, 512))
    mean = hoc_sequence(X, 6).mean(axis=0)
    assert np.all(np.diff(mean) >= 0)


def test_hoc_vector_layout_and_oracle():
    t = synth_trial(SynthSpec(duration_s=4, noise_sigma=2, seed=5,
                              components=(SynthComponent("theta", 4, 6),)))
    fv = hoc_vector(t)
    assert len(fv) == 24 and fv.names[5] == "Fp1.hoc.D6"
    expect = np.concatenate([naive_hoc(t.channel(c), 6) for c in CH])
    np.testing.assert_array_equal(fv.values, expect)


def test_hoc_vector_identical_channels():
    x = np.random.default_rng(8).normal(size=64)
    fv = hoc_vector(trial_from([x] * 4))
    blocks = fv.values.reshape(4, 6)
    assert all(np.array_equal(blocks[0], b) for b in blocks)


def test_hoc_vector_too_short():
    with pytest.raises(SignalTooShort):
        hoc_vector(trial_from(np.random.default_rng(0).normal(size=(4, 6))))


# -- vectors, layout, CSV ------------------------------------------------------------

def test_layout_dimensions():
    assert [len(layout_for(m)) for m in ("stats_time", "stats_band", "spd", "hoc")] == \
        [24, 96, 16, 24]


def test_layout_mismatch():
    with pytest.raises(LayoutMismatch):
        FeatureVector("spd", [1.0, 2.0], [("Fp1", "alpha", "spd")])


def test_select_subset(synth_bands):
    fv = spd_vector(synth_bands)
    sub = fv.select(bands=["delta", "theta"])
    assert len(sub) == 8 and {d[1] for d in sub.layout} == {"delta", "theta"}
    with pytest.raises(LayoutMismatch):
        fv.select(channels=["Cz"])


def test_extract_dispatch(synth_bands):
    t = synth_trial(SynthSpec(duration_s=4, noise_sigma=1, seed=1))
    assert extract("hoc", t) == hoc_vector(t)
    assert extract("spd", t, synth_bands) == spd_vector(synth_bands)
    with pytest.raises(MissingBandSignal):
        extract("stats_band", t)


@given(st.integers(0, 2 ** 32 - 1))
def test_csv_round_trip_bit_exact(seed):
    rng = np.random.default_rng(seed)
    layout = layout_for("stats_band")
    rows = [((1, i + 1), FeatureVector("stats_band", rng.normal(size=96) * 10.0 ** rng.integers(-8, 8),
                                       layout)) for i in range(3)]
    back = read_feature_csv(io.StringIO(feature_csv_text(rows)), "stats_band")
    assert [k for k, _ in back] == [k for k, _ in rows]
    assert all(a == b for (_, a), (_, b) in zip(rows, back))
