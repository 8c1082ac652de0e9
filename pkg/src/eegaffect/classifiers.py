"""Linear C-SVM (one-vs-one, dual coordinate descent) and Breiman random forest.

Both share ``train_*`` / :func:`predict` / :func:`decision_score` and
serialise to JSON.  Class indices follow :class:`~eegaffect.labeling.Label`
order (Low < Medium < High); every vote tie goes to the lowest index.
"""
from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import _core
from .errors import (ConstantFeature, DimensionMismatch, InvalidSpec,
                     NonConvergenceWarning, NotBinaryModel, SingleClassDataset)
from .labeling import Label, LabeledDataset

SVM = "svm"
RANDOM_FOREST = "random_forest"


@dataclass(frozen=True)
class TrainConfig:
    kind: str = RANDOM_FOREST
    C: float = 1.0
    n_trees: int = 500
    mtry: int | None = None          # None -> floor(sqrt(n_features))
    min_leaf: int = 1
    bootstrap: bool = True
    max_epochs: int = 2000
    tol: float = 1e-4
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if self.kind not in (SVM, RANDOM_FOREST):
            raise InvalidSpec(f"unknown classifier kind {self.kind!r}")
        for name in ("C", "n_trees", "min_leaf", "max_epochs", "tol", "n_jobs"):
            if not getattr(self, name) > 0:
                raise InvalidSpec(f"{name} must be positive")
        if self.mtry is not None and self.mtry < 1:
            raise InvalidSpec("mtry must be positive")

    def resolved_mtry(self, n_features: int) -> int:
        m = self.mtry if self.mtry is not None else int(math.isqrt(n_features))
        return max(1, min(m, n_features))

    def to_dict(self, runtime: bool = True) -> dict:
        d = asdict(self)
        if not runtime:          # worker count never changes a trained model
            del d["n_jobs"]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


def _seed_for(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) & 0xFFFFFFFFFFFFFFFF for p in parts])
               .generate_state(1, np.uint64)[0])


@dataclass(frozen=True, eq=False)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=np.float64)
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        bad = np.flatnonzero(scale == 0.0)
        if bad.size:
            raise ConstantFeature(f"constant feature column(s) {bad.tolist()}")
        return cls(mean, scale)

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.scale


def _check_train(data: LabeledDataset, min_per_class: int = 1):
    if data.X.shape[0] == 0:
        raise SingleClassDataset("empty training set")
    data.require_classes(min_per_class)
    classes = np.unique(data.y)
    index = np.searchsorted(classes, data.y)
    return classes.astype(np.int64), index.astype(np.int64)


def _as_row(model, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.n_features:
        raise DimensionMismatch(f"expected {model.n_features} features, got {x.shape[-1]}")
    return x


# -- linear SVM ---------------------------------------------------------------

@dataclass(eq=False)
class LinearSvmModel:
    classes: np.ndarray
    pairs: list                      # (i, j, w, b) with class index i < j; positive -> j
    standardizer: Standardizer
    config: TrainConfig
    converged: bool = True
    dual_traces: list = field(default_factory=list, repr=False)
    kind: str = SVM

    @property
    def n_features(self) -> int:
        return self.standardizer.mean.size

    def pair_scores(self, X) -> np.ndarray:
        Z = self.standardizer.transform(_as_row(self, X))
        return np.stack([Z @ w + b for _, _, w, b in self.pairs], axis=-1)

    def predict_many(self, X) -> np.ndarray:
        X = np.atleast_2d(_as_row(self, X))
        scores = self.pair_scores(X)
        votes = np.zeros((X.shape[0], self.classes.size), dtype=np.int64)
        for p, (i, j, _, _) in enumerate(self.pairs):
            pos = scores[:, p] > 0
            votes[pos, j] += 1
            votes[~pos, i] += 1
        return self.classes[np.argmax(votes, axis=1)]

    def decision_scores(self, X) -> np.ndarray:
        if self.classes.size != 2:
            raise NotBinaryModel(f"model has {self.classes.size} classes")
        return self.pair_scores(np.atleast_2d(X))[:, 0]

    def to_dict(self) -> dict:
        return {"kind": SVM, "config": self.config.to_dict(runtime=False),
                "classes": self.classes.tolist(),
                "standardizer": {"mean": self.standardizer.mean.tolist(),
                                 "scale": self.standardizer.scale.tolist()},
                "pairs": [{"i": int(i), "j": int(j), "w": w.tolist(), "b": float(b)}
                          for i, j, w, b in self.pairs],
                "converged": self.converged}


def _fit_binary(Z: np.ndarray, positive: np.ndarray, cfg: TrainConfig, seed: int):
    Zb = np.ascontiguousarray(np.hstack([Z, np.ones((Z.shape[0], 1))]))
    ys = np.where(positive, 1.0, -1.0)
    w, _, trace, gap, epochs, ok = _core.svm_dual_cd(Zb, ys, float(cfg.C), int(cfg.max_epochs),
                                                     float(cfg.tol), seed)
    slack = 1e-9 * np.maximum(1.0, np.abs(trace[:-1]))
    if trace.size > 1 and np.any(np.diff(trace) < -slack):
        raise RuntimeError("dual objective decreased between epochs")
    return w[:-1].copy(), float(w[-1]), trace, ok


def train_linear_svm(data: LabeledDataset, cfg: TrainConfig | None = None) -> LinearSvmModel:
    """Soft-margin linear SVM on standardized features, one model per class pair.

    The bias is learned as the weight of a constant unit feature.
    """
    cfg = cfg or TrainConfig(kind=SVM)
    classes, index = _check_train(data, min_per_class=2)
    std = Standardizer.fit(data.X)
    Z = std.transform(data.X)
    pairs, traces, converged = [], [], True
    for i in range(classes.size):
        for j in range(i + 1, classes.size):
            rows = (index == i) | (index == j)
            w, b, trace, ok = _fit_binary(Z[rows], index[rows] == j, cfg,
                                          _seed_for(cfg.seed, i, j))
            pairs.append((i, j, w, b))
            traces.append(trace)
            converged &= ok
    if not converged:
        warnings.warn(f"SVM hit the {cfg.max_epochs}-epoch cap before reaching "
                      f"duality gap {cfg.tol}", NonConvergenceWarning, stacklevel=2)
    return LinearSvmModel(classes, pairs, std, cfg, converged, traces)


# -- random forest ------------------------------------------------------------

@dataclass(eq=False)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def votes(self, X) -> np.ndarray:
        return _core.tree_leaf_votes(self.feature, self.threshold, self.left, self.right,
                                     self.counts, np.ascontiguousarray(X, dtype=np.float64))

    def to_dict(self) -> dict:
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "counts": self.counts.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(np.array(d["feature"], dtype=np.int64),
                   np.array(d["threshold"], dtype=np.float64),
                   np.array(d["left"], dtype=np.int64),
                   np.array(d["right"], dtype=np.int64),
                   np.array(d["counts"], dtype=np.float64).reshape(len(d["feature"]), -1))


@dataclass(eq=False)
class RandomForestModel:
    classes: np.ndarray
    trees: list
    n_features: int
    config: TrainConfig
    mtry: int
    oob_accuracy: float = float("nan")
    kind: str = RANDOM_FOREST

    def vote_matrix(self, X) -> np.ndarray:
        """(n_rows, n_classes) count of trees voting for each class."""
        X = np.atleast_2d(_as_row(self, X))
        votes = np.zeros((X.shape[0], self.classes.size), dtype=np.int64)
        rows = np.arange(X.shape[0])
        for tree in self.trees:
            np.add.at(votes, (rows, tree.votes(X)), 1)
        return votes

    def predict_many(self, X) -> np.ndarray:
        return self.classes[np.argmax(self.vote_matrix(X), axis=1)]

    def decision_scores(self, X) -> np.ndarray:
        if self.classes.size != 2:
            raise NotBinaryModel(f"model has {self.classes.size} classes")
        return self.vote_matrix(X)[:, 1] / len(self.trees)

    def to_dict(self) -> dict:
        return {"kind": RANDOM_FOREST, "config": self.config.to_dict(runtime=False),
                "classes": self.classes.tolist(), "n_features": self.n_features,
                "mtry": self.mtry, "oob_accuracy": self.oob_accuracy,
                "trees": [t.to_dict() for t in self.trees]}


def _bootstrap_weights(n: int, seed_seq, bootstrap: bool) -> np.ndarray:
    if not bootstrap:
        return np.ones(n, dtype=np.int64)
    rng = np.random.default_rng(seed_seq)
    return np.bincount(rng.integers(0, n, size=n), minlength=n).astype(np.int64)


def train_random_forest(data: LabeledDataset, cfg: TrainConfig | None = None) -> RandomForestModel:
    """Bootstrap-aggregated Gini CART trees with ``mtry`` candidate features per node.

    Tree ``t`` draws its bootstrap and its feature sampling from seeds derived
    from ``(cfg.seed, t)`` only, so the forest does not depend on ``n_jobs``.
    """
    cfg = cfg or TrainConfig()
    classes, index = _check_train(data)
    X = np.ascontiguousarray(data.X)
    n, d = X.shape
    mtry = cfg.resolved_mtry(d)

    def build(t: int):
        ss = np.random.SeedSequence([int(cfg.seed) & 0xFFFFFFFFFFFFFFFF, t])
        weight = _bootstrap_weights(n, ss, cfg.bootstrap)
        kernel_seed = int(ss.generate_state(1, np.uint64)[0])
        arrays = _core.grow_tree(X, index, weight, classes.size, mtry, cfg.min_leaf, kernel_seed)
        return Tree(*arrays), weight

    if cfg.n_jobs > 1:
        with ThreadPoolExecutor(cfg.n_jobs) as pool:
            built = list(pool.map(build, range(cfg.n_trees)))
    else:
        built = [build(t) for t in range(cfg.n_trees)]

    trees = [t for t, _ in built]
    oob_votes = np.zeros((n, classes.size), dtype=np.int64)
    for tree, weight in built:
        oob = np.flatnonzero(weight == 0)
        if oob.size:
            np.add.at(oob_votes, (oob, tree.votes(X[oob])), 1)
    has_vote = oob_votes.sum(axis=1) > 0
    oob_acc = (float(np.mean(np.argmax(oob_votes[has_vote], axis=1) == index[has_vote]))
               if has_vote.any() else float("nan"))
    return RandomForestModel(classes, trees, d, cfg, mtry, oob_acc)


# -- shared surface -------------------------------------------------------------

def train(data: LabeledDataset, cfg: TrainConfig):
    if cfg.kind == SVM:
        return train_linear_svm(data, cfg)
    return train_random_forest(data, cfg)


def predict(model, x) -> Label:
    """Label of a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch("predict takes one feature vector; use predict_many")
    return Label(int(model.predict_many(x[None, :])[0]))


def decision_score(model, x) -> float:
    """SVM margin or RF fraction of trees voting for the higher class."""
    x = np.asarray(x, dtype=np.float64)
    return float(model.decision_scores(np.atleast_2d(_as_row(model, x)))[0])


def model_to_json(model) -> str:
    return json.dumps(model.to_dict(), separators=(",", ":"))


def model_from_json(text: str):
    d = json.loads(text)
    cfg = TrainConfig.from_dict(d["config"])
    classes = np.array(d["classes"], dtype=np.int64)
    if d["kind"] == SVM:
        std = Standardizer(np.array(d["standardizer"]["mean"]), np.array(d["standardizer"]["scale"]))
        pairs = [(p["i"], p["j"], np.array(p["w"], dtype=np.float64), float(p["b"]))
                 for p in d["pairs"]]
        return LinearSvmModel(classes, pairs, std, cfg, d["converged"])
    if d["kind"] == RANDOM_FOREST:
        return RandomForestModel(classes, [Tree.from_dict(t) for t in d["trees"]],
                                 d["n_features"], cfg, d["mtry"], d["oob_accuracy"])
    raise InvalidSpec(f"unknown model kind {d['kind']!r}")


def with_seed(cfg: TrainConfig, seed: int) -> TrainConfig:
    return replace(cfg, seed=seed)
