"""Shared domain types for the encoding pipeline.

Everything here is a plain dataclass around numpy arrays. Objects are
treated as immutable after construction (fields are frozen; arrays are not
written to by any code in this package), so they can be shared freely
across worker processes.

``validate`` never raises on bad data: it returns the full list of
invariant violations so a loader can report every problem in one pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

# Half-open TR range [start, end).
Run = tuple[int, int]


@dataclass(frozen=True)
class FeatureMatrix:
    """Per-word model activations for one (model, layer, sequence length)."""

    values: np.ndarray  # (words, dim), float32
    model: str = "unknown"
    layer: int = 0
    sequence_length: int = 1

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def meta(self) -> dict:
        return {
            "model": self.model,
            "layer": self.layer,
            "sequence_length": self.sequence_length,
        }


@dataclass(frozen=True)
class VoxelSeries:
    """One participant's voxel activity per TR, with run boundaries.

    ``runs`` must be ordered, disjoint half-open ranges that partition
    [0, n). Voxel counts are per subject; every downstream vector keeps the
    length of the series it was scored against.
    """

    values: np.ndarray  # (n TRs, v voxels), float32
    runs: tuple[Run, ...]
    tr_seconds: float = 2.0

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def v(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class WordTiming:
    """Word presentation times, in seconds from the start of each run."""

    onsets: np.ndarray  # (words,), float64, seconds from run start
    run_of_word: np.ndarray  # (words,), int64
    word_interval: float = 0.5

    @property
    def n_words(self) -> int:
        return self.onsets.shape[0]


@dataclass(frozen=True)
class DesignMatrix:
    """TR-level regressors: ``lag_count`` lagged copies of ``n_components``
    reduced feature columns, concatenated."""

    values: np.ndarray  # (n TRs, lag_count * n_components), float32
    lag_count: int = 4
    n_components: int = 10

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Fold:
    """One cross-validation fold: row indices into the TR axis."""

    train: np.ndarray  # int64, sorted
    test: np.ndarray  # int64, sorted


@dataclass(frozen=True)
class FoldPlan:
    """Run-wise cross-validation schedule with end-trimmed test runs.

    ``trim`` TRs are dropped from both ends of each test run; trimmed TRs
    appear in neither the train nor the test set of that fold.
    """

    folds: tuple[Fold, ...]
    trim: int = 10


@dataclass(frozen=True)
class DiscourseLabels:
    """Per-feature one-hot vectors over words (0/1 uint8)."""

    features: dict[str, np.ndarray]  # name -> (words,), values in {0, 1}
    n_words: int

    def names(self) -> list[str]:
        return list(self.features)


@dataclass(frozen=True)
class RoiMaskSet:
    """Named boolean masks over voxels. Masks are opaque index sets; no
    anatomical coordinates are handled here."""

    masks: dict[str, np.ndarray]  # name -> (v,), bool
    n_voxels: int

    def names(self) -> list[str]:
        return list(self.masks)


@dataclass(frozen=True)
class ResultRecord:
    """One scoring outcome for a (model, layer, seqlen, subject, fold) cell.

    This is the unit of aggregation: ``pearson`` and ``lambda_chosen`` have
    one entry per voxel of the series the cell was scored against.
    """

    model: str
    layer: int
    seqlen: int
    subject: str
    fold: int
    pearson: np.ndarray  # (v,), float32, in [-1, 1]
    acc_20v20: float
    lambda_chosen: np.ndarray  # (v,), float32, > 0

    @property
    def key(self) -> tuple[str, int, int, str, int]:
        return (self.model, self.layer, self.seqlen, self.subject, self.fold)

    @property
    def pearson_mean(self) -> float:
        return float(np.mean(self.pearson))


def _check_finite(name: str, values: np.ndarray, out: list[str]) -> None:
    bad = ~np.isfinite(values)
    if bad.any():
        where = np.argwhere(bad)[0]
        loc = tuple(int(i) for i in where)
        out.append(f"{name}: non-finite value at {loc}")


def _validate_runs(runs: Sequence[Run], n: int, out: list[str]) -> None:
    if len(runs) < 2:
        out.append(f"runs: expected at least 2 runs, got {len(runs)}")
    prev_end = None
    for i, (start, end) in enumerate(runs):
        if start >= end:
            out.append(f"runs[{i}]: empty or inverted range [{start}, {end})")
        if prev_end is not None:
            if start < prev_end:
                out.append(f"runs[{i}]: overlapping runs")
            elif start > prev_end:
                out.append(f"runs[{i}]: gap before run (starts at {start}, previous ends at {prev_end})")
        elif start != 0:
            out.append(f"runs[0]: must start at 0, starts at {start}")
        prev_end = end
    if runs and runs[-1][1] != n:
        out.append(f"runs do not cover series: end {runs[-1][1]} != {n} TRs")


def validate(obj, runs: Sequence[Run] | None = None) -> list[str]:
    """Collect every invariant violation of a domain object.

    Returns an empty list when the object is valid. For a ``FoldPlan`` the
    run geometry is an optional extra argument; run containment and trim
    checks are only performed when it is given.
    """
    out: list[str] = []

    if isinstance(obj, FeatureMatrix):
        if obj.values.ndim != 2:
            return [f"FeatureMatrix: expected 2-d values, got {obj.values.ndim}-d"]
        if obj.rows < 1:
            out.append("FeatureMatrix: rows must be >= 1")
        if obj.cols < 1:
            out.append("FeatureMatrix: cols must be >= 1")
        if obj.sequence_length < 1:
            out.append("FeatureMatrix: sequence_length must be >= 1")
        _check_finite("FeatureMatrix", obj.values, out)

    elif isinstance(obj, VoxelSeries):
        if obj.values.ndim != 2:
            return [f"VoxelSeries: expected 2-d values, got {obj.values.ndim}-d"]
        _validate_runs(obj.runs, obj.n, out)
        if obj.tr_seconds <= 0:
            out.append("VoxelSeries: tr_seconds must be > 0")
        _check_finite("VoxelSeries", obj.values, out)

    elif isinstance(obj, WordTiming):
        if obj.onsets.shape != obj.run_of_word.shape:
            return ["WordTiming: onsets and run_of_word lengths differ"]
        if obj.word_interval <= 0:
            out.append("WordTiming: word_interval must be > 0")
        if (obj.run_of_word < 0).any():
            out.append("WordTiming: negative run index")
        if (obj.onsets < 0).any():
            out.append("WordTiming: negative onset")
        for run in np.unique(obj.run_of_word):
            onsets = obj.onsets[obj.run_of_word == run]
            if not (np.diff(onsets) > 0).all():
                out.append(f"WordTiming: onsets not strictly increasing in run {int(run)}")

    elif isinstance(obj, DesignMatrix):
        if obj.values.ndim != 2:
            return [f"DesignMatrix: expected 2-d values, got {obj.values.ndim}-d"]
        if obj.cols != obj.lag_count * obj.n_components:
            out.append(
                f"DesignMatrix: cols {obj.cols} != lag_count {obj.lag_count} "
                f"* n_components {obj.n_components}"
            )
        _check_finite("DesignMatrix", obj.values, out)

    elif isinstance(obj, FoldPlan):
        for f, fold in enumerate(obj.folds):
            if np.intersect1d(fold.train, fold.test).size:
                out.append(f"folds[{f}]: train and test overlap")
            if runs is not None and fold.test.size:
                lo, hi = int(fold.test.min()), int(fold.test.max())
                homes = [r for r, (s, e) in enumerate(runs) if s <= lo and hi < e]
                if len(homes) != 1:
                    out.append(f"folds[{f}]: test indices not inside exactly one run")
                else:
                    s, e = runs[homes[0]]
                    trimmed = np.r_[np.arange(s, s + obj.trim), np.arange(e - obj.trim, e)]
                    used = np.union1d(fold.train, fold.test)
                    if np.intersect1d(trimmed, used).size:
                        out.append(f"folds[{f}]: trimmed TRs appear in train or test")

    elif isinstance(obj, DiscourseLabels):
        for name, vec in obj.features.items():
            if vec.shape != (obj.n_words,):
                out.append(f"DiscourseLabels[{name}]: length {vec.shape} != {obj.n_words} words")
            elif not np.isin(vec, (0, 1)).all():
                out.append(f"DiscourseLabels[{name}]: values outside {{0, 1}}")

    elif isinstance(obj, RoiMaskSet):
        for name, mask in obj.masks.items():
            if mask.shape != (obj.n_voxels,):
                out.append(f"RoiMaskSet[{name}]: length {mask.shape} != {obj.n_voxels} voxels")

    elif isinstance(obj, ResultRecord):
        if obj.pearson.shape != obj.lambda_chosen.shape:
            out.append("ResultRecord: pearson and lambda_chosen lengths differ")
        if not (0.0 <= obj.acc_20v20 <= 1.0):
            out.append(f"ResultRecord: acc_20v20 {obj.acc_20v20} outside [0, 1]")
        if np.isfinite(obj.pearson).all():
            if (np.abs(obj.pearson) > 1.0 + 1e-6).any():
                out.append("ResultRecord: pearson outside [-1, 1]")
        else:
            out.append("ResultRecord: non-finite pearson")
        if not ((obj.lambda_chosen > 0) & np.isfinite(obj.lambda_chosen)).all():
            out.append("ResultRecord: lambda_chosen must be positive and finite")

    else:
        raise TypeError(f"validate: unsupported type {type(obj).__name__}")

    return out
