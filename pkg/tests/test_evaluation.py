import json
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import chi2_contingency

from eegaffect.classifiers import TrainConfig
from eegaffect.errors import ConstantFeature, SingleClassLabels, TooFewInstances
from eegaffect.evaluation import (CvResult, cross_validate, cv_result_json, feature_histograms,
                                  histogram_csv, plan_folds, roc_csv, roc_curve,
                                  serialized_models, table_csv, tabulate, trapezoid_area)
from eegaffect.labeling import LabeledDataset
from oracles import mann_whitney_auc

RF = TrainConfig(n_trees=100, seed=0)


def dataset(X, y, keys=None):
    X = np.asarray(X, dtype=float)
    keys = keys or [(i // 40 + 1, i % 40 + 1) for i in range(len(y))]
    return LabeledDataset(X, y, [("Fp1", "alpha", f"f{j}") for j in range(X.shape[1])],
                          "valence", "bipartition", keys, "spd")


def separable(seed=0, n=100, gap=5.0):
    rng = np.random.default_rng(seed)
    y = np.repeat([0, 2], n // 2)
    X = rng.normal(size=(n, 4)) + np.where(y == 2, gap / 2, -gap / 2)[:, None]
    return dataset(X, y)


# -- folds ----------------------------------------------------------------------

def test_balanced_folds():
    y = np.repeat([0, 2], 50)
    plan = plan_folds(100, 10, y, seed=3)
    assert plan.fold_sizes().tolist() == [10] * 10
    for f in range(10):
        assert np.bincount(y[plan.assignment == f], minlength=3)[[0, 2]].tolist() == [5, 5]


def test_singleton_folds():
    plan = plan_folds(10, 10, np.repeat([0, 2], 5))
    assert sorted(plan.assignment.tolist()) == list(range(10))


def test_too_few():
    with pytest.raises(TooFewInstances):
        plan_folds(5, 10, np.zeros(5))


@given(st.lists(st.integers(0, 2), min_size=10, max_size=200), st.integers(2, 10),
       st.integers(0, 2 ** 32 - 1))
def test_fold_invariants(labels, k, seed):
    y = np.array(labels)
    plan = plan_folds(y.size, k, y, seed)
    sizes = plan.fold_sizes()
    assert sizes.sum() == y.size and sizes.max() - sizes.min() <= 1
    for c in np.unique(y):
        per = np.bincount(plan.assignment[y == c], minlength=k)
        assert per.max() - per.min() <= 1
    assert np.array_equal(plan.assignment, plan_folds(y.size, k, y, seed).assignment)


def test_small_class_warning():
    y = np.r_[np.zeros(30, int), np.full(3, 2)]
    assert plan_folds(33, 10, y).warnings


def test_grouped_folds_keep_subjects_together():
    keys = [(s, t) for s in range(1, 13) for t in range(1, 6)]
    y = np.tile([0, 2], 30)
    plan = plan_folds(60, 10, y, keys=keys, groups=[k[0] for k in keys])
    for s in range(1, 13):
        assert len({int(plan.assignment[i]) for i, k in enumerate(keys) if k[0] == s}) == 1


# -- cross-validation -------------------------------------------------------------

def test_cv_separable_rf():
    data = separable()
    r = cross_validate(data, RF, plan_folds(len(data), 10, data.y, 0, keys=data.keys))
    assert r.mean_accuracy >= 0.95
    assert len(r.fold_accuracies) == 10 and all(0 <= a <= 1 for a in r.fold_accuracies)
    assert r.mean_accuracy == pytest.approx(np.mean(r.fold_accuracies))


def test_cv_permutation_null():
    data = separable()
    means = []
    for seed in range(20):
        y = np.random.default_rng(seed).permutation(data.y)
        d = data.with_y(y)
        means.append(cross_validate(d, TrainConfig(n_trees=50, seed=seed),
                                    plan_folds(len(d), 10, y, seed, keys=d.keys)).mean_accuracy)
    m = float(np.mean(means))
    assert 0.4 <= m <= 0.6
    assert abs(m - 0.5) <= 3 * float(np.std(means))


def test_cv_duplicated_data_memorized():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(20, 3))
    y = np.tile([0, 2], 10)
    keys = [(1, i + 1) for i in range(40)]
    data = dataset(np.vstack([X, X]), np.r_[y, y], keys)
    plan = type(plan_folds(40, 2, data.y))(2, 0, np.r_[np.zeros(20, int), np.ones(20, int)])
    r = cross_validate(data, TrainConfig(n_trees=1, bootstrap=False), plan)
    assert r.mean_accuracy == 1.0


@pytest.mark.parametrize("cfg", [TrainConfig(kind="svm"), TrainConfig(n_trees=20, seed=4)])
def test_no_leakage(cfg):
    data = separable(1, n=60)
    plan = plan_folds(len(data), 5, data.y, 2, keys=data.keys)
    _, base = cross_validate(data, cfg, plan, return_models=True)
    base_json = serialized_models(base)
    for f in range(plan.k):
        X = data.X.copy()
        held = plan.assignment == f
        X[held] *= 1e6
        _, models = cross_validate(data.with_X(X), cfg, plan, return_models=True)
        assert serialized_models(models)[f] == base_json[f]


def test_cv_row_permutation_invariant():
    data = separable(2, n=80)
    perm = np.random.default_rng(0).permutation(len(data))
    shuffled = data.subset(perm)
    cfg = TrainConfig(n_trees=30, seed=1)
    a = cross_validate(data, cfg, plan_folds(len(data), 10, data.y, 5, keys=data.keys))
    b = cross_validate(shuffled, cfg, plan_folds(len(shuffled), 10, shuffled.y, 5,
                                                 keys=shuffled.keys))
    assert cv_result_json(a) == cv_result_json(b)


def test_cv_parallel_folds_match_serial():
    data = separable(3, n=60)
    plan = plan_folds(len(data), 10, data.y, 0, keys=data.keys)
    cfg = TrainConfig(n_trees=20)
    assert cv_result_json(cross_validate(data, cfg, plan)) == \
        cv_result_json(cross_validate(data, cfg, plan, n_jobs=4))


def test_cv_skips_single_class_training_split():
    X = np.random.default_rng(0).normal(size=(12, 2))
    y = np.r_[np.zeros(10, int), np.full(2, 2)]
    data = dataset(X, y)
    # both High rows in fold 0 leaves fold 0's training split single-class
    assignment = np.r_[np.arange(10) % 2, 0, 0]
    plan = type(plan_folds(12, 2, y))(2, 0, assignment)
    r = cross_validate(data, TrainConfig(n_trees=5), plan)
    assert r.skipped == [0] and r.fold_accuracies[0] is None
    assert any("fold 0" in n for n in r.notes)


def test_cv_result_json_round_trip():
    data = separable(4, n=40)
    r = cross_validate(data, TrainConfig(n_trees=10), plan_folds(40, 4, data.y, keys=data.keys))
    text = cv_result_json(r)
    assert cv_result_json(CvResult.from_dict(json.loads(text))) == text


# -- ROC ----------------------------------------------------------------------

def test_roc_perfect_and_inverted():
    s = np.arange(10.0)
    y = np.r_[np.zeros(5, int), np.full(5, 2)]
    assert roc_curve(s, y).auc == 1.0
    assert roc_curve(s, 2 - y).auc == 0.0


def test_roc_random_near_half():
    rng = np.random.default_rng(0)
    s = rng.normal(size=1000)
    y = rng.permutation(np.repeat([0, 2], 500))
    assert 0.45 <= roc_curve(s, y).auc <= 0.55


@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 300))
def test_auc_equals_mann_whitney(seed, n):
    rng = np.random.default_rng(seed)
    s = rng.permutation(n) + rng.uniform(0, 0.5, n)       # tie-free
    y = rng.integers(0, 2, n) * 2
    y[0], y[-1] = 0, 2
    curve = roc_curve(s, y)
    assert abs(curve.auc - mann_whitney_auc(s, y == 2)) <= 1e-12
    assert curve.points[0] == (0.0, 0.0) and curve.points[-1] == (1.0, 1.0)
    assert np.all(np.diff(curve.fpr) >= 0) and np.all(np.diff(curve.tpr) >= 0)
    assert abs(curve.auc - trapezoid_area(curve.fpr, curve.tpr)) <= 1e-12


def test_roc_ties_grouped():
    s = [0.5, 0.5, 0.5, 0.5]
    y = [0, 2, 0, 2]
    c = roc_curve(s, y)
    assert c.points == [(0.0, 0.0), (1.0, 1.0)] and c.auc == 0.5
    assert abs(c.auc - mann_whitney_auc(s, np.array(y) == 2)) <= 1e-12


def test_roc_single_class():
    with pytest.raises(SingleClassLabels):
        roc_curve([1.0, 2.0], [2, 2])


def test_roc_csv_header():
    text = roc_csv(roc_curve([0.1, 0.9], [0, 2]))
    assert text.splitlines()[0] == "threshold,fpr,tpr" and len(text.splitlines()) == 4


# -- histograms ---------------------------------------------------------------

def test_histograms_disjoint():
    data = dataset(np.r_[np.zeros(5), np.ones(5)][:, None], np.r_[np.zeros(5, int), np.full(5, 2)])
    h = feature_histograms(data, 0, 2)
    assert h.counts["Low"].tolist() == [5, 0] and h.counts["High"].tolist() == [0, 5]


def test_histograms_same_distribution():
    rng = np.random.default_rng(0)
    data = dataset(rng.normal(size=(2000, 1)), np.repeat([0, 2], 1000))
    h = feature_histograms(data, 0, 10)
    table = np.array([h.counts["Low"], h.counts["High"]])
    table = table[:, table.sum(axis=0) > 0]
    assert chi2_contingency(table)[1] > 0.01


def test_histograms_constant():
    with pytest.raises(ConstantFeature):
        feature_histograms(dataset(np.ones((6, 1)), [0, 2] * 3), 0, 4)


@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 30))
def test_histogram_invariants(seed, bins):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, 50) * 2
    y[:2] = [0, 2]
    data = dataset(rng.normal(size=(50, 1)), y)
    h = feature_histograms(data, 0, bins)
    assert np.all(np.diff(h.edges) > 0) and h.edges.size == bins + 1
    assert h.counts["Low"].sum() == np.sum(y == 0) and h.counts["High"].sum() == np.sum(y == 2)
    assert histogram_csv(h).count("\n") == bins + 1


# -- tabulation ----------------------------------------------------------------

def fake(method, scheme, dim, acc, clf="svm"):
    return CvResult(method, scheme, dim, clf, [acc, acc], [5, 5], {"tag": acc})


def test_table_shape_four_by_four():
    grid = [(m, s, d) for m in ("stats_time", "stats_band", "spd", "hoc")
            for s in ("bipartition", "tripartition") for d in ("arousal", "valence")]
    results = [fake(m, s, d, 0.5 + 0.01 * i) for i, (m, s, d) in enumerate(grid)]
    t = tabulate(results)
    assert len(t.rows) == 4 and len(t.columns) == 4
    assert [r[1] for r in t.rows] == ["stats_time", "stats_band", "spd", "hoc"]
    assert t.columns == [("bipartition", "arousal"), ("bipartition", "valence"),
                         ("tripartition", "arousal"), ("tripartition", "valence")]
    assert t.cell_text(("svm", "stats_time"), ("bipartition", "arousal")) == "50.0"
    assert table_csv(t).splitlines()[0] == ("classifier,method,bipartition/arousal,"
                                            "bipartition/valence,tripartition/arousal,"
                                            "tripartition/valence")


def test_table_single():
    t = tabulate([fake("spd", "bipartition", "valence", 0.884)])
    assert len(t.rows) == 1 and len(t.columns) == 1
    assert t.cell_text(t.rows[0], t.columns[0]) == "88.4"


def test_table_duplicate_later_wins():
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        t = tabulate([fake("spd", "bipartition", "valence", 0.6),
                      fake("spd", "bipartition", "valence", 0.7)])
    assert w and t.warnings
    assert t.cells[(("svm", "spd"), ("bipartition", "valence"))] == pytest.approx(0.7)
