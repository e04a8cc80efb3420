"""Alignment scoring: per-voxel Pearson, block classification, noise ceiling.

The block metric asks, for two disjoint windows of consecutive held-out
TRs, whether the predictions sit closer to their own window's recordings
than to the swapped assignment. Chance is 0.5; exact distance ties score
0.5 so a constant predictor stays at chance.

Repetitions draw from per-(seed, fold, rep) RNG streams, so parallel and
serial execution sample identical block pairs on any platform.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .datamodel import FoldPlan, VoxelSeries
from .encoder import DEFAULT_LAMBDA_GRID, CvResult, fit_predict_cv
from .preprocess import fit_pca, apply_pca
from .datamodel import DesignMatrix


@dataclass(frozen=True)
class TwentyVTwentyConfig:
    block_len: int = 20
    reps: int = 1000
    seed: int = 0
    distance: str = "euclidean"  # or "correlation"

    def __post_init__(self):
        if self.block_len < 1:
            raise ValueError("block_len must be >= 1")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.distance not in ("euclidean", "correlation"):
            raise ValueError(f"unknown distance {self.distance!r}")


def rep_rng(seed: int, fold: int, rep: int) -> np.random.Generator:
    """Independent stream per repetition; identical across platforms."""
    return np.random.default_rng(np.random.SeedSequence([seed, fold, rep]))


def pearson_per_voxel(
    pred: np.ndarray,
    truth: np.ndarray,
    return_degenerate: bool = False,
):
    """Per-column Pearson correlation between two (rows, v) arrays.

    Columns with zero variance in either input get r = 0 and are reported
    in the degeneracy mask when requested.
    """
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ValueError(f"pearson_per_voxel: shapes {pred.shape} and {truth.shape} differ")
    if pred.shape[0] < 3:
        raise ValueError("pearson_per_voxel: need at least 3 rows")
    a = pred - pred.mean(axis=0)
    b = truth - truth.mean(axis=0)
    na = np.sqrt((a**2).sum(axis=0))
    nb = np.sqrt((b**2).sum(axis=0))
    degenerate = (na == 0) | (nb == 0)
    denom = np.where(degenerate, 1.0, na * nb)
    r = (a * b).sum(axis=0) / denom
    r[degenerate] = 0.0
    np.clip(r, -1.0, 1.0, out=r)
    if return_degenerate:
        return r, degenerate
    return r


# ---------------------------------------------------------------------------
# Block pair geometry


def _segments(test_idx: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of consecutive TR indices, as (start_pos, end_pos) into
    the test row axis."""
    test_idx = np.asarray(test_idx)
    if test_idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(test_idx) != 1) + 1
    bounds = np.concatenate([[0], breaks, [test_idx.size]])
    return [(int(bounds[i]), int(bounds[i + 1])) for i in range(len(bounds) - 1)]


class _BlockPairs:
    """Uniform enumeration of disjoint pairs of consecutive-TR windows.

    Windows live inside maximal consecutive segments of the fold's test
    TRs; two windows are a valid pair when they share no TR. Pairs are
    indexed 0..total-1 so a single uniform integer draws a pair without
    rejection.
    """

    def __init__(self, test_idx: np.ndarray, block_len: int):
        self.block_len = block_len
        starts: list[int] = []  # window start, as position into test rows
        seg_last: list[int] = []  # index of the last window in the same segment
        for seg_start, seg_end in _segments(test_idx):
            n_windows = seg_end - seg_start - block_len + 1
            if n_windows <= 0:
                continue
            first = len(starts)
            starts.extend(range(seg_start, seg_start + n_windows))
            seg_last.extend([first + n_windows - 1] * n_windows)
        self.starts = np.asarray(starts, dtype=np.int64)
        overlap_after = np.minimum(block_len - 1, np.asarray(seg_last) - np.arange(len(starts))) if starts else np.zeros(0, dtype=np.int64)
        m = len(starts)
        self.valid_after = (m - 1 - np.arange(m)) - overlap_after if m else np.zeros(0, dtype=np.int64)
        self.first_valid = np.arange(m) + overlap_after + 1 if m else np.zeros(0, dtype=np.int64)
        self.cum = np.concatenate([[0], np.cumsum(self.valid_after)])
        self.total = int(self.cum[-1])

    def pair(self, t: int) -> tuple[int, int]:
        """Map a flat index in [0, total) to (row_start_a, row_start_b)."""
        i = int(np.searchsorted(self.cum, t, side="right") - 1)
        j = int(self.first_valid[i] + (t - self.cum[i]))
        return int(self.starts[i]), int(self.starts[j])

    def all_pairs(self):
        for t in range(self.total):
            yield self.pair(t)


def _block_distance(a: np.ndarray, b: np.ndarray, distance: str) -> float:
    if distance == "euclidean":
        return float(np.linalg.norm(a - b))
    flat_a, flat_b = a.ravel(), b.ravel()
    r = pearson_per_voxel(flat_a[:, None], flat_b[:, None]) if flat_a.size >= 3 else np.array([0.0])
    return float(1.0 - r[0])


def _score_pair(
    pred: np.ndarray,
    truth_rows: np.ndarray,
    a: int,
    b: int,
    block_len: int,
    distance: str,
) -> float:
    pa, pb = pred[a : a + block_len], pred[b : b + block_len]
    ta, tb = truth_rows[a : a + block_len], truth_rows[b : b + block_len]
    correct = _block_distance(pa, ta, distance) + _block_distance(pb, tb, distance)
    swapped = _block_distance(pa, tb, distance) + _block_distance(pb, ta, distance)
    if correct < swapped:
        return 1.0
    if correct == swapped:
        return 0.5
    return 0.0


def twenty_v_twenty(
    pred_by_fold: Sequence[np.ndarray],
    truth: np.ndarray,
    plan: FoldPlan,
    cfg: TwentyVTwentyConfig = TwentyVTwentyConfig(),
    exhaustive: bool = False,
    return_per_fold: bool = False,
):
    """Block classification accuracy over held-out predictions.

    Args:
        pred_by_fold: one (len(test), v) prediction array per fold, rows
            aligned with ``plan.folds[f].test``.
        truth: (n, v) target values on the same scale as the predictions
            (standardized target space).
        plan: the fold schedule the predictions came from.
        cfg: block length, repetition count, seed, and distance.
        exhaustive: score every disjoint window pair exactly once instead
            of sampling ``cfg.reps`` pairs.

    Returns:
        Mean accuracy across folds (and the per-fold list when
        ``return_per_fold``).
    """
    truth = np.asarray(truth, dtype=np.float64)
    if len(pred_by_fold) != len(plan.folds):
        raise ValueError("twenty_v_twenty: one prediction array per fold required")
    per_fold = []
    for f, fold in enumerate(plan.folds):
        pred = np.asarray(pred_by_fold[f], dtype=np.float64)
        if pred.shape[0] != fold.test.size:
            raise ValueError(f"twenty_v_twenty: fold {f} predictions do not cover its test TRs")
        pairs = _BlockPairs(fold.test, cfg.block_len)
        if pairs.total == 0:
            raise ValueError(
                f"twenty_v_twenty: fold {f} test set too short for two disjoint "
                f"blocks of {cfg.block_len} TRs"
            )
        truth_rows = truth[fold.test]
        if exhaustive:
            score = sum(
                _score_pair(pred, truth_rows, a, b, cfg.block_len, cfg.distance)
                for a, b in pairs.all_pairs()
            )
            per_fold.append(score / pairs.total)
        else:
            score = 0.0
            for rep in range(cfg.reps):
                t = int(rep_rng(cfg.seed, f, rep).integers(pairs.total))
                a, b = pairs.pair(t)
                score += _score_pair(pred, truth_rows, a, b, cfg.block_len, cfg.distance)
            per_fold.append(score / cfg.reps)
    accuracy = float(np.mean(per_fold))
    if return_per_fold:
        return accuracy, per_fold
    return accuracy


def score_cv(
    cv: CvResult,
    plan: FoldPlan,
    cfg: TwentyVTwentyConfig = TwentyVTwentyConfig(),
) -> tuple[float, list[float], list[np.ndarray]]:
    """Convenience scoring of a cross-validated fit.

    Returns (overall 20v20, per-fold 20v20, per-fold Pearson vectors).
    """
    _, truth = cv.assemble()
    acc, acc_folds = twenty_v_twenty(cv.pred_by_fold, truth, plan, cfg, return_per_fold=True)
    pearson_folds = [pearson_per_voxel(fr.pred, fr.truth) for fr in cv.folds]
    return acc, acc_folds, pearson_folds


# ---------------------------------------------------------------------------
# Subject-to-subject noise ceiling


@dataclass(frozen=True)
class NoiseCeiling:
    """Ceiling estimate for one target subject."""

    per_source: dict[str, float]

    @property
    def ceiling(self) -> float:
        return float(np.mean(list(self.per_source.values())))


def noise_ceiling(
    target: VoxelSeries,
    sources: Sequence[VoxelSeries],
    plan: FoldPlan,
    grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
    reducer_k: int = 40,
    cfg: TwentyVTwentyConfig = TwentyVTwentyConfig(),
    source_names: Sequence[str] | None = None,
) -> NoiseCeiling:
    """Predict the target subject from each source subject's activity.

    Source voxels are reduced to ``reducer_k`` principal components, which
    stand in for a design matrix in the same cross-validated ridge fit used
    for model features; the ceiling is the mean block accuracy over sources.
    """
    names = list(source_names) if source_names is not None else [f"source{i}" for i in range(len(sources))]
    per_source: dict[str, float] = {}
    for name, source in zip(names, sources):
        if source.n != target.n:
            raise ValueError(f"noise_ceiling: source {name} has {source.n} TRs, target has {target.n}")
        pca = fit_pca(source.values, k=reducer_k)
        reduced = apply_pca(pca, source.values)
        design = DesignMatrix(values=reduced.astype(np.float32), lag_count=1, n_components=reducer_k)
        cv = fit_predict_cv(design, target, plan, grid)
        _, truth = cv.assemble()
        per_source[name] = twenty_v_twenty(cv.pred_by_fold, truth, plan, cfg)
    return NoiseCeiling(per_source=per_source)


def noise_ceiling_grid(
    subjects: dict[str, VoxelSeries],
    plan: FoldPlan,
    grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
    reducer_k: int = 40,
    cfg: TwentyVTwentyConfig = TwentyVTwentyConfig(),
) -> dict:
    """All (target, source) pairs plus the across-target summary.

    Returns a dict with ``pairs`` (one accuracy per ordered pair),
    ``per_target`` (mean over that target's sources), and ``mean``/``sem``
    across targets, formatted as ``summary``.
    """
    names = list(subjects)
    pairs: dict[tuple[str, str], float] = {}
    per_target: dict[str, float] = {}
    for target_name in names:
        source_names = [s for s in names if s != target_name]
        result = noise_ceiling(
            subjects[target_name],
            [subjects[s] for s in source_names],
            plan,
            grid,
            reducer_k,
            cfg,
            source_names=source_names,
        )
        for s, acc in result.per_source.items():
            pairs[(target_name, s)] = acc
        per_target[target_name] = result.ceiling
    values = np.array(list(per_target.values()))
    mean = float(values.mean())
    sem = float(values.std(ddof=1) / np.sqrt(values.size)) if values.size > 1 else float("nan")
    return {
        "pairs": pairs,
        "per_target": per_target,
        "mean": mean,
        "sem": sem,
        "summary": f"{mean:.2f} +/- {sem:.3f} (sem) across {values.size} targets",
    }
