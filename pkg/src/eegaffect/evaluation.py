"""Stratified k-fold cross-validation, ROC/AUC, class histograms and accuracy tables."""
from __future__ import annotations

import csv
import io
import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .classifiers import TrainConfig, model_to_json, train
from .errors import (ConstantFeature, InvalidSpec, SingleClassDataset,
                     SingleClassLabels, TooFewInstances)
from .labeling import Label, LabeledDataset, gap_policy

DEFAULT_FOLDS = 10
SCHEME_ORDER = ("bipartition", "tripartition")
DIMENSION_ORDER = ("arousal", "valence")
METHOD_ORDER = ("stats_time", "stats_band", "spd", "hoc")


def _key_order(keys) -> np.ndarray:
    """Row indices sorted by (subject_id, trial_id)."""
    return np.array(sorted(range(len(keys)), key=lambda i: tuple(keys[i])), dtype=np.intp)


# -- fold planning --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FoldPlan:
    k: int
    seed: int
    assignment: np.ndarray          # row -> fold
    grouped: bool = False
    warnings: tuple = ()

    def fold_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)

    def split(self, fold: int):
        test = np.flatnonzero(self.assignment == fold)
        train = np.flatnonzero(self.assignment != fold)
        return train, test

    def to_dict(self) -> dict:
        return {"k": self.k, "seed": self.seed, "grouped": self.grouped,
                "assignment": self.assignment.tolist(), "warnings": list(self.warnings)}


def plan_folds(n: int, k: int, y, seed: int = 0, keys=None,
               groups=None) -> FoldPlan:
    """Stratified fold assignment.

    Rows are put in ``keys`` order (row order if ``keys`` is None), shuffled
    with ``seed``, grouped by class, and dealt round-robin with one running
    counter so fold sizes and per-class fold counts each differ by at most one.
    With ``groups`` every group (e.g. subject) lands in a single fold.
    """
    y = np.asarray(y)
    if k < 2:
        raise InvalidSpec(f"k must be >= 2, got {k}")
    if n < k:
        raise TooFewInstances(f"{n} rows cannot fill {k} folds")
    if y.size != n:
        raise InvalidSpec(f"{y.size} labels for {n} rows")
    base = _key_order(keys) if keys is not None else np.arange(n)
    rng = np.random.default_rng(seed)
    notes = []

    if groups is not None:
        groups = np.asarray(groups)
        uniq = np.unique(groups)
        if uniq.size < k:
            raise TooFewInstances(f"{uniq.size} groups cannot fill {k} folds")
        assignment = np.empty(n, dtype=np.int64)
        load = np.zeros(k, dtype=np.int64)
        for g in uniq[rng.permutation(uniq.size)]:
            rows = np.flatnonzero(groups == g)
            f = int(np.argmin(load))
            assignment[rows] = f
            load[f] += rows.size
        return FoldPlan(k, seed, assignment, True, ())

    order = base[rng.permutation(n)]
    assignment = np.empty(n, dtype=np.int64)
    pos = 0
    for c in np.unique(y):
        rows = order[y[order] == c]
        if rows.size < k:
            notes.append(f"class {c} has {rows.size} < {k} members; some folds lack it")
        assignment[rows] = (pos + np.arange(rows.size)) % k
        pos += rows.size
    return FoldPlan(k, seed, assignment, False, tuple(notes))


# -- cross-validation -----------------------------------------------------------

@dataclass(eq=False)
class CvResult:
    method: str
    scheme: str
    dimension: str
    classifier: str
    fold_accuracies: list            # None for skipped folds
    fold_sizes: list
    config: dict
    keys: list = field(default_factory=list)
    predictions: list = field(default_factory=list)    # held-out label per row
    labels: list = field(default_factory=list)
    scores: list | None = None                         # held-out decision score (binary only)
    skipped: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def mean_accuracy(self) -> float:
        done = [a for a in self.fold_accuracies if a is not None]
        return float(np.mean(done)) if done else float("nan")

    @property
    def key(self) -> tuple:
        return (self.classifier, self.method, self.scheme, self.dimension)

    def to_dict(self) -> dict:
        return {"method": self.method, "scheme": self.scheme, "dimension": self.dimension,
                "classifier": self.classifier, "mean_accuracy": self.mean_accuracy,
                "fold_accuracies": self.fold_accuracies, "fold_sizes": self.fold_sizes,
                "skipped_folds": self.skipped, "notes": self.notes, "config": self.config,
                "rows": [{"subject_id": k[0], "trial_id": k[1], "label": Label(t).title,
                          "predicted": Label(p).title,
                          **({} if self.scores is None else {"score": s})}
                         for k, t, p, s in zip(self.keys, self.labels, self.predictions,
                                               self.scores or [None] * len(self.keys))]}

    @classmethod
    def from_dict(cls, d: dict) -> "CvResult":
        rows = d.get("rows", [])
        scores = [r["score"] for r in rows] if rows and "score" in rows[0] else None
        return cls(d["method"], d["scheme"], d["dimension"], d["classifier"],
                   d["fold_accuracies"], d["fold_sizes"], d["config"],
                   [(r["subject_id"], r["trial_id"]) for r in rows],
                   [int(Label[r["predicted"].upper()]) for r in rows],
                   [int(Label[r["label"].upper()]) for r in rows],
                   scores, d.get("skipped_folds", []), d.get("notes", []))


def _fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, 0xF01D, fold])
               .generate_state(1, np.uint64)[0] >> 1)


def cross_validate(data: LabeledDataset, cfg: TrainConfig, plan: FoldPlan,
                   return_models: bool = False, n_jobs: int = 1):
    """Train on k-1 folds, score the held-out fold, for every fold.

    Training rows are presented to the learner in (subject, trial) order so the
    result does not depend on how the dataset rows happen to be ordered.  A
    fold whose training split holds a single class is skipped and noted.
    Returns a :class:`CvResult`, or ``(CvResult, models)`` with ``return_models``.
    """
    n = len(data)
    if plan.assignment.size != n:
        raise InvalidSpec(f"fold plan covers {plan.assignment.size} rows, data has {n}")
    rank = np.empty(n, dtype=np.intp)
    rank[_key_order(data.keys)] = np.arange(n)
    binary = len(np.unique(data.y)) == 2

    def run(fold: int):
        train_idx, test_idx = plan.split(fold)
        train_idx = train_idx[np.argsort(rank[train_idx], kind="stable")]
        if test_idx.size == 0:
            return fold, None, None, None, "empty test fold"
        try:
            model = train(data.subset(train_idx), replace(cfg, seed=_fold_seed(cfg.seed, fold)))
        except SingleClassDataset as exc:
            return fold, None, None, None, f"training split unusable: {exc}"
        Xt = data.X[test_idx]
        pred = model.predict_many(Xt)
        score = model.decision_scores(Xt) if binary and model.classes.size == 2 else None
        return fold, model, pred, score, None

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            outcomes = list(pool.map(run, range(plan.k)))
    else:
        outcomes = [run(f) for f in range(plan.k)]

    predictions = np.full(n, -1, dtype=np.int64)
    scores = np.full(n, np.nan) if binary else None
    accs, sizes, skipped, models = [], [], [], []
    notes = list(plan.warnings)
    for fold, model, pred, score, reason in outcomes:
        _, test_idx = plan.split(fold)
        sizes.append(int(test_idx.size))
        models.append(model)
        if model is None:
            accs.append(None)
            skipped.append(fold)
            notes.append(f"fold {fold}: {reason}")
            continue
        predictions[test_idx] = pred
        accs.append(float(np.mean(pred == data.y[test_idx])))
        if scores is not None:
            if score is None:
                notes.append(f"fold {fold}: model not binary, no scores")
            else:
                scores[test_idx] = score

    order = _key_order(data.keys)
    result = CvResult(
        method=data.method, scheme=data.scheme.value, dimension=data.dimension.value,
        classifier=cfg.kind, fold_accuracies=accs, fold_sizes=sizes,
        config={"train": cfg.to_dict(runtime=False), "folds": plan.k, "fold_seed": plan.seed,
                "stratified": not plan.grouped, "grouped": plan.grouped,
                "contiguous_boundaries": data.contiguous_boundaries,
                "gap_policy": gap_policy(data.contiguous_boundaries),
                "class_counts": data.class_counts()},
        keys=[data.keys[i] for i in order],
        predictions=[int(predictions[i]) for i in order],
        labels=[int(data.y[i]) for i in order],
        scores=None if scores is None else [float(scores[i]) for i in order],
        skipped=skipped, notes=notes)
    if return_models:
        return result, models
    return result


def serialized_models(models) -> list:
    return [None if m is None else model_to_json(m) for m in models]


# -- ROC ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray          # +inf first, then unique scores descending
    auc: float

    @property
    def points(self) -> list:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def trapezoid_area(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return float(np.sum((x[1:] - x[:-1]) * (y[1:] + y[:-1]) * 0.5))


def roc_curve(scores, y, positive: Label = Label.HIGH) -> RocCurve:
    """Sweep the threshold over the unique scores, highest first; tied scores
    move together.  Higher scores should indicate ``positive``."""
    s = np.asarray(scores, dtype=np.float64)
    pos = np.asarray(y) == int(positive)
    if s.shape != pos.shape:
        raise InvalidSpec(f"{s.size} scores for {pos.size} labels")
    n_pos = int(pos.sum())
    n_neg = pos.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassLabels("ROC needs both classes")
    order = np.argsort(-s, kind="stable")
    s, pos = s[order], pos[order]
    last = np.r_[np.flatnonzero(s[1:] != s[:-1]), s.size - 1]
    tp = np.cumsum(pos)[last]
    fp = (last + 1) - tp
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    return RocCurve(fpr, tpr, np.r_[np.inf, s[last]], trapezoid_area(fpr, tpr))


# -- histograms ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class HistogramPair:
    edges: np.ndarray
    counts: dict                     # class title -> counts per bin
    descriptor: tuple


def feature_histograms(data: LabeledDataset, feature_index: int, bins: int = 20) -> HistogramPair:
    """Per-class counts over shared equal-width bins spanning the feature's range."""
    if bins < 2:
        raise InvalidSpec("need at least 2 bins")
    col = data.X[:, feature_index]
    lo, hi = float(col.min()), float(col.max())
    if not hi > lo:
        raise ConstantFeature(f"feature {feature_index} has zero range")
    edges = np.linspace(lo, hi, bins + 1)
    counts = {}
    for c in np.unique(data.y):
        counts[Label(c).title] = np.histogram(col[data.y == c], bins=edges)[0].astype(np.int64)
    return HistogramPair(edges, counts, data.layout[feature_index])


# -- tabulation -----------------------------------------------------------------

@dataclass(eq=False)
class ReportTable:
    rows: list                  # (classifier, method)
    columns: list               # (scheme, dimension)
    cells: dict                 # (row, column) -> mean accuracy in [0, 1]
    warnings: list
    configs: dict               # result key -> config snapshot

    def cell_text(self, row, col) -> str:
        v = self.cells.get((row, col))
        return "" if v is None or v != v else format_percent(v)


def format_percent(acc: float) -> str:
    return f"{100.0 * acc:.1f}"


def _rank(value, order):
    return (order.index(value), value) if value in order else (len(order), value)


def tabulate(results) -> ReportTable:
    """Rows are (classifier, method); columns are (scheme, dimension)."""
    latest, notes = {}, []
    for r in results:
        if r.key in latest:
            msg = f"duplicate result {r.key}: later result replaces earlier"
            notes.append(msg)
            warnings.warn(msg, stacklevel=2)
        latest[r.key] = r
    rows = sorted({(k[0], k[1]) for k in latest},
                  key=lambda rk: (rk[0], _rank(rk[1], METHOD_ORDER)))
    cols = sorted({(k[2], k[3]) for k in latest},
                  key=lambda ck: (_rank(ck[0], SCHEME_ORDER), _rank(ck[1], DIMENSION_ORDER)))
    cells = {((k[0], k[1]), (k[2], k[3])): r.mean_accuracy for k, r in latest.items()}
    configs = {"/".join(k): r.config for k, r in sorted(latest.items())}
    return ReportTable(rows, cols, cells, notes, configs)


# -- writers ------------------------------------------------------------------

def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False,
                      default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def _nan_to_none(obj):
    if isinstance(obj, float) and obj != obj:
        return None
    if isinstance(obj, dict):
        return {k: _nan_to_none(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_nan_to_none(v) for v in obj]
    return obj


def cv_result_json(result: CvResult) -> str:
    return dumps_json(_nan_to_none(result.to_dict()))


def table_csv(table: ReportTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["classifier", "method", *(f"{s}/{d}" for s, d in table.columns)])
    for row in table.rows:
        w.writerow([*row, *(table.cell_text(row, col) for col in table.columns)])
    return buf.getvalue()


def table_dict(table: ReportTable) -> dict:
    return _nan_to_none({
        "columns": [list(c) for c in table.columns],
        "rows": [{"classifier": r[0], "method": r[1],
                  "accuracy": [table.cells.get((r, c)) for c in table.columns],
                  "percent": [table.cell_text(r, c) for c in table.columns]}
                 for r in table.rows],
        "warnings": table.warnings,
        "configs": table.configs})


def roc_csv(curve: RocCurve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["threshold", "fpr", "tpr"])
    for t, f, p in zip(curve.thresholds, curve.fpr, curve.tpr):
        w.writerow([repr(float(t)), repr(float(f)), repr(float(p))])
    return buf.getvalue()


def histogram_csv(hist: HistogramPair) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    titles = list(hist.counts)
    w.writerow(["bin_low", "bin_high", *titles])
    for b in range(hist.edges.size - 1):
        w.writerow([repr(float(hist.edges[b])), repr(float(hist.edges[b + 1])),
                    *(int(hist.counts[t][b]) for t in titles)])
    return buf.getvalue()
