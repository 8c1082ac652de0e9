import io

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from eegaffect.errors import (EmptyAfterExclusion, LayoutMismatch, MissingRating,
                              NonFiniteSample, RatingOutOfRange, SingleClassDataset)
from eegaffect.features import FeatureVector, layout_for
from eegaffect.labeling import (EXCLUDED, Label, LabeledDataset, build_dataset, map_rating,
                                write_labeled_csv)
from eegaffect.signal_model import Ratings
from oracles import table_label

SPD = layout_for("spd")


def rows(n):
    rng = np.random.default_rng(n)
    return [((1, i + 1), FeatureVector("spd", rng.normal(size=16), SPD)) for i in range(n)]


def ratings_for(values, dim="valence"):
    return {(1, i + 1): Ratings(v, 5.0) if dim == "valence" else Ratings(5.0, v)
            for i, v in enumerate(values)}


def test_published_examples():
    assert map_rating(2.0, "tripartition") is Label.LOW
    assert map_rating(5.0, "bipartition") is EXCLUDED
    assert map_rating(3.5, "bipartition") is EXCLUDED
    assert map_rating(3.5, "tripartition") is EXCLUDED


@pytest.mark.parametrize("r, lab", [(3.0, Label.LOW), (4.0, Label.MEDIUM), (6.0, Label.MEDIUM),
                                    (7.0, Label.HIGH), (1.0, Label.LOW), (9.0, Label.HIGH)])
def test_inclusive_boundaries(r, lab):
    assert map_rating(r, "tripartition") is lab


def test_out_of_range():
    with pytest.raises(RatingOutOfRange):
        map_rating(9.5, "tripartition")
    with pytest.raises(RatingOutOfRange):
        map_rating(0.5, "bipartition")


def test_sweep_against_table():
    for i in range(81):
        r = round(1.0 + 0.1 * i, 1)
        for scheme in ("tripartition", "bipartition"):
            got = map_rating(r, scheme)
            assert (None if got is None else got.title) == table_label(r, scheme)


def test_contiguous_boundaries_option():
    assert map_rating(3.5, "tripartition", contiguous_boundaries=True) is Label.LOW
    assert map_rating(3.7, "tripartition", contiguous_boundaries=True) is Label.MEDIUM
    assert map_rating(6.5, "bipartition", contiguous_boundaries=True) is Label.HIGH
    assert map_rating(5.0, "bipartition", contiguous_boundaries=True) is EXCLUDED


ratings_st = st.floats(1.0, 9.0, allow_nan=False)


@given(ratings_st, ratings_st, st.sampled_from(["bipartition", "tripartition"]), st.booleans())
def test_monotone(r1, r2, scheme, contiguous):
    a, b = sorted((r1, r2))
    la, lb = map_rating(a, scheme, contiguous), map_rating(b, scheme, contiguous)
    assume(la is not None and lb is not None)
    assert la <= lb


@given(ratings_st)
def test_bipartition_never_medium(r):
    assert map_rating(r, "bipartition") in (Label.LOW, Label.HIGH, EXCLUDED)


def test_build_three_trials():
    feats = rows(3)
    rt = ratings_for([2.0, 5.0, 8.0])
    bi = build_dataset(feats, rt, "valence", "bipartition")
    tri = build_dataset(feats, rt, "valence", "tripartition")
    assert bi.y.tolist() == [Label.LOW, Label.HIGH]
    assert tri.y.tolist() == [Label.LOW, Label.MEDIUM, Label.HIGH]
    assert bi.keys == ((1, 1), (1, 3))
    assert tri.class_counts() == {"Low": 1, "Medium": 1, "High": 1}


def test_arousal_dimension_used():
    ds = build_dataset(rows(2), ratings_for([1.5, 8.5], "arousal"), "arousal", "bipartition")
    assert ds.y.tolist() == [0, 2] and ds.dimension.value == "arousal"


def test_all_medium_is_empty():
    with pytest.raises(EmptyAfterExclusion):
        build_dataset(rows(3), ratings_for([5.0] * 3), "valence", "bipartition")


def test_single_class():
    with pytest.raises(SingleClassDataset):
        build_dataset(rows(3), ratings_for([2.0, 2.5, 5.0]), "valence", "bipartition")


def test_missing_rating():
    with pytest.raises(MissingRating):
        build_dataset(rows(3), ratings_for([2.0, 8.0]), "valence", "bipartition")


def test_layout_mismatch_between_rows():
    feats = rows(2) + [((1, 3), FeatureVector("hoc", np.zeros(24), layout_for("hoc")))]
    with pytest.raises(LayoutMismatch):
        build_dataset(feats, ratings_for([2.0, 8.0, 8.0]), "valence", "bipartition")


@given(st.lists(ratings_st, min_size=4, max_size=30))
def test_bipartition_is_tripartition_minus_medium(values):
    feats = rows(len(values))
    rt = ratings_for(values)
    try:
        tri = build_dataset(feats, rt, "valence", "tripartition")
        bi = build_dataset(feats, rt, "valence", "bipartition")
    except (EmptyAfterExclusion, SingleClassDataset):
        assume(False)
    tri_keys = {k for k, y in zip(tri.keys, tri.y) if y != Label.MEDIUM}
    assert set(bi.keys) == tri_keys
    assert set(bi.y.tolist()) <= {0, 2}


def test_labeled_csv():
    ds = build_dataset(rows(3), ratings_for([2.0, 5.0, 8.0]), "valence", "tripartition")
    buf = io.StringIO()
    write_labeled_csv(ds, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0].startswith("subject_id,trial_id,Fp1.alpha.spd")
    assert lines[0].endswith("label,dimension,scheme")
    assert lines[2].endswith("Medium,valence,tripartition")


def test_dataset_rejects_nan():
    with pytest.raises(NonFiniteSample):
        LabeledDataset([[np.nan]], [0], [("Fp1", None, "x")], "valence", "bipartition", [(1, 1)])
