"""SAM rating to Low/Medium/High labels and labeled dataset assembly."""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import (EmptyAfterExclusion, LayoutMismatch, MissingRating,
                     NonFiniteSample, RatingOutOfRange, SingleClassDataset)


class AffectDimension(str, enum.Enum):
    VALENCE = "valence"
    AROUSAL = "arousal"


class PartitionScheme(str, enum.Enum):
    TRIPARTITION = "tripartition"
    BIPARTITION = "bipartition"


class Label(enum.IntEnum):
    LOW = 0
    MEDIUM = 1
    HIGH = 2

    @property
    def title(self) -> str:
        return self.name.capitalize()


EXCLUDED = None

# published ranges, both ends inclusive
LOW_RANGE = (1.0, 3.0)
MEDIUM_RANGE = (4.0, 6.0)
HIGH_RANGE = (7.0, 9.0)
# equal thirds of [1, 9], only with contiguous_boundaries=True
LOW_CUT = 1.0 + 8.0 / 3.0
HIGH_CUT = 1.0 + 16.0 / 3.0


def map_rating(r: float, scheme: PartitionScheme | str,
               contiguous_boundaries: bool = False) -> Label | None:
    """Label for a 1-9 rating, or ``None`` when the rating is excluded.

    Ratings in the gaps (3, 4) and (6, 7) are excluded under both schemes
    unless ``contiguous_boundaries`` is set, in which case [1, 9] is cut into
    equal thirds.  Bipartition also excludes Medium.
    """
    scheme = PartitionScheme(scheme)
    r = float(r)
    if not (1.0 <= r <= 9.0):
        raise RatingOutOfRange(f"rating {r} outside [1, 9]")
    if contiguous_boundaries:
        label = Label.LOW if r < LOW_CUT else Label.HIGH if r > HIGH_CUT else Label.MEDIUM
    elif LOW_RANGE[0] <= r <= LOW_RANGE[1]:
        label = Label.LOW
    elif MEDIUM_RANGE[0] <= r <= MEDIUM_RANGE[1]:
        label = Label.MEDIUM
    elif HIGH_RANGE[0] <= r <= HIGH_RANGE[1]:
        label = Label.HIGH
    else:
        return EXCLUDED
    if scheme is PartitionScheme.BIPARTITION and label is Label.MEDIUM:
        return EXCLUDED
    return label


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    X: np.ndarray
    y: np.ndarray            # Label values as int
    layout: tuple
    dimension: AffectDimension
    scheme: PartitionScheme
    keys: tuple
    method: str = ""
    contiguous_boundaries: bool = False

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64)
        y = np.array(self.y, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] != y.size or y.size != len(self.keys):
            raise LayoutMismatch(f"X {X.shape}, y {y.shape}, {len(self.keys)} keys disagree")
        if X.shape[1] != len(self.layout):
            raise LayoutMismatch(f"{X.shape[1]} columns for {len(self.layout)} descriptors")
        if not np.all(np.isfinite(X)):
            raise NonFiniteSample("feature matrix contains NaN or Inf")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "keys", tuple(tuple(k) for k in self.keys))
        object.__setattr__(self, "layout", tuple(tuple(d) for d in self.layout))
        object.__setattr__(self, "dimension", AffectDimension(self.dimension))
        object.__setattr__(self, "scheme", PartitionScheme(self.scheme))

    def __len__(self):
        return self.y.size

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def classes(self) -> list:
        return [Label(c) for c in np.unique(self.y)]

    def class_counts(self) -> dict:
        return {Label(c).title: int(np.sum(self.y == c)) for c in np.unique(self.y)}

    def subset(self, rows) -> "LabeledDataset":
        rows = np.asarray(rows, dtype=np.intp)
        return LabeledDataset(self.X[rows], self.y[rows], self.layout, self.dimension,
                              self.scheme, [self.keys[i] for i in rows], self.method,
                              self.contiguous_boundaries)

    def with_X(self, X) -> "LabeledDataset":
        return LabeledDataset(X, self.y, self.layout, self.dimension, self.scheme,
                              self.keys, self.method, self.contiguous_boundaries)

    def with_y(self, y) -> "LabeledDataset":
        return LabeledDataset(self.X, y, self.layout, self.dimension, self.scheme,
                              self.keys, self.method, self.contiguous_boundaries)

    def require_classes(self, min_per_class: int = 1) -> None:
        labels, counts = np.unique(self.y, return_counts=True)
        if labels.size < 2:
            raise SingleClassDataset(f"only one class present ({labels.tolist()})")
        if counts.min() < min_per_class:
            raise SingleClassDataset(f"each class needs >= {min_per_class} rows, got {counts.tolist()}")


def build_dataset(features: Sequence[tuple], ratings: Mapping | Sequence[tuple],
                  dim: AffectDimension | str, scheme: PartitionScheme | str,
                  contiguous_boundaries: bool = False) -> LabeledDataset:
    """Attach labels to feature rows and drop excluded ones.

    ``features`` holds ``(key, FeatureVector)`` pairs; ``ratings`` maps key to
    :class:`~eegaffect.signal_model.Ratings` (a mapping or pair list).
    """
    dim = AffectDimension(dim)
    scheme = PartitionScheme(scheme)
    ratings = dict(ratings)
    if not features:
        raise EmptyAfterExclusion("no feature rows")
    layout, method = features[0][1].layout, features[0][1].method
    X, y, keys = [], [], []
    for key, fv in features:
        if fv.layout != layout:
            raise LayoutMismatch(f"row {key} layout differs from the first row")
        key = tuple(key)
        if key not in ratings:
            raise MissingRating(f"no ratings for {key}")
        label = map_rating(ratings[key].get(dim.value), scheme, contiguous_boundaries)
        if label is EXCLUDED:
            continue
        X.append(fv.values)
        y.append(int(label))
        keys.append(key)
    if not y:
        raise EmptyAfterExclusion(f"every row excluded under {scheme.value}/{dim.value}")
    ds = LabeledDataset(np.vstack(X), y, layout, dim, scheme, keys, method, contiguous_boundaries)
    if len(set(y)) < 2:
        raise SingleClassDataset(f"only {Label(y[0]).title} remains under "
                                 f"{scheme.value}/{dim.value}")
    return ds


def write_labeled_csv(data: LabeledDataset, fh) -> None:
    from .features import descriptor_name

    writer = csv.writer(fh, lineterminator="\n")
    names = [descriptor_name(data.method, d) if data.method else ".".join(map(str, d))
             for d in data.layout]
    writer.writerow(["subject_id", "trial_id", *names, "label", "dimension", "scheme"])
    for key, row, lab in zip(data.keys, data.X, data.y):
        writer.writerow([key[0], key[1], *(repr(float(v)) for v in row),
                         Label(lab).title, data.dimension.value, data.scheme.value])


def gap_policy(contiguous_boundaries: bool) -> str:
    """Human-readable gap handling note embedded in reports."""
    if contiguous_boundaries:
        return "contiguous equal-thirds boundaries (Low < 3.667, High > 6.333)"
    return "published ranges only; ratings in (3,4) and (6,7) excluded"
