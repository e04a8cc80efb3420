"""Discourse-feature alignment analysis.

Word-level labels map to TRs (a TR carries a feature when any of its words
does), the same number of labeled TRs is sampled for every feature so the
comparison is fair, and per-voxel Pearson is computed on just those rows.
A random-TR control of identical size is reported alongside.

The balanced variant retrains on the final TRs of the session, where the
features occur at more similar rates, and evaluates on the opening TRs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .datamodel import DesignMatrix, DiscourseLabels, Run, VoxelSeries, WordTiming
from .encoder import DEFAULT_LAMBDA_GRID, RidgeFit, _SvdRidge
from .metrics import pearson_per_voxel
from .preprocess import standardize_fit, word_tr_index

RANDOM_CONTROL = "__random__"


def label_trs(
    labels: DiscourseLabels,
    timing: WordTiming,
    runs: Sequence[Run],
    tr_seconds: float = 2.0,
) -> dict[str, np.ndarray]:
    """Per-feature one-hot vectors over TRs.

    TR t carries feature F when any word presented during t is labeled
    with F.
    """
    word_trs = word_tr_index(timing, runs, tr_seconds)
    n = runs[-1][1]
    out: dict[str, np.ndarray] = {}
    for name, vec in labels.features.items():
        mask = np.zeros(n, dtype=np.uint8)
        mask[word_trs[vec.astype(bool)]] = 1
        out[name] = mask
    return out


def sample_feature_trs(
    tr_mask: np.ndarray,
    count: int = 160,
    seed: int = 0,
    feature: str = "",
) -> np.ndarray:
    """Sample exactly ``count`` labeled TRs, uniformly without replacement."""
    idx = np.flatnonzero(np.asarray(tr_mask))
    if idx.size < count:
        raise ValueError(
            f"feature {feature or '<unnamed>'}: only {idx.size} labeled TRs available, need {count}"
        )
    if idx.size == count:
        return idx
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    return np.sort(rng.choice(idx, size=count, replace=False))


def discourse_pearson(pred: np.ndarray, truth: np.ndarray, sampled_trs: np.ndarray) -> np.ndarray:
    """Per-voxel Pearson restricted to the sampled TR rows."""
    sampled_trs = np.asarray(sampled_trs)
    pred_rows = np.asarray(pred, dtype=np.float64)[sampled_trs]
    if np.isnan(pred_rows).any():
        raise ValueError("discourse_pearson: sampled TR lacking a prediction")
    truth_rows = np.asarray(truth, dtype=np.float64)[sampled_trs]
    return pearson_per_voxel(pred_rows, truth_rows)


@dataclass(frozen=True)
class FeatureAlignment:
    feature: str
    r: np.ndarray  # (v,)
    sampled_trs: np.ndarray
    n_labeled: int

    @property
    def mean(self) -> float:
        return float(np.mean(self.r))


def discourse_analysis(
    pred: np.ndarray,
    truth: np.ndarray,
    labels: DiscourseLabels,
    timing: WordTiming,
    runs: Sequence[Run],
    tr_seconds: float = 2.0,
    count: int = 160,
    seed: int = 0,
    include_random: bool = True,
) -> dict[str, FeatureAlignment]:
    """Score every discourse feature on an equal number of scored TRs.

    ``pred`` is a full-length prediction array with NaN at unscored TRs;
    sampling is restricted to scored TRs so the trimmed run ends never
    enter. The ``__random__`` entry is the equal-size control drawn from
    all scored TRs.
    """
    pred = np.asarray(pred, dtype=np.float64)
    scored = ~np.isnan(pred).any(axis=1)
    masks = label_trs(labels, timing, runs, tr_seconds)
    out: dict[str, FeatureAlignment] = {}
    for name in sorted(masks):
        eligible = masks[name].astype(bool) & scored
        sampled = sample_feature_trs(eligible, count, seed, feature=name)
        out[name] = FeatureAlignment(
            feature=name,
            r=discourse_pearson(pred, truth, sampled),
            sampled_trs=sampled,
            n_labeled=int(eligible.sum()),
        )
    if include_random:
        sampled = sample_feature_trs(scored, count, seed, feature=RANDOM_CONTROL)
        out[RANDOM_CONTROL] = FeatureAlignment(
            feature=RANDOM_CONTROL,
            r=discourse_pearson(pred, truth, sampled),
            sampled_trs=sampled,
            n_labeled=int(scored.sum()),
        )
    return out


# ---------------------------------------------------------------------------
# Balanced split protocol


@dataclass(frozen=True)
class BalancedConfig:
    train_trs: int = 500  # final TRs used for fitting
    test_trs: int = 700  # opening TRs used for evaluation
    sample_count: int = 74
    grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    inner_fraction: float = 0.8  # contiguous split of the training window
    seed: int = 0
    include_random: bool = True


@dataclass(frozen=True)
class BalancedResult:
    per_feature: dict[str, FeatureAlignment]
    train_idx: np.ndarray
    test_idx: np.ndarray
    fit: RidgeFit


def balanced_protocol(
    design: DesignMatrix,
    series: VoxelSeries,
    labels: DiscourseLabels,
    timing: WordTiming,
    cfg: BalancedConfig = BalancedConfig(),
) -> BalancedResult:
    """Fit on the last ``train_trs`` TRs, evaluate features on the first
    ``test_trs``, with an equal TR sample per feature."""
    n = series.n
    if n < cfg.train_trs + cfg.test_trs:
        raise ValueError(f"balanced_protocol: need {cfg.train_trs + cfg.test_trs} TRs, series has {n}")
    if design.rows != n:
        raise ValueError("balanced_protocol: design and series length differ")
    train_idx = np.arange(n - cfg.train_trs, n, dtype=np.int64)
    test_idx = np.arange(0, cfg.test_trs, dtype=np.int64)

    X = np.asarray(design.values, dtype=np.float64)
    Y = np.asarray(series.values, dtype=np.float64)
    x_std = standardize_fit(X, train_idx)
    y_std = standardize_fit(Y, train_idx)
    Xtr, Ytr = x_std.apply(X[train_idx]), y_std.apply(Y[train_idx])

    # Lambda from one contiguous inner split of the training window.
    split = int(cfg.inner_fraction * cfg.train_trs)
    inner_solver = _SvdRidge(Xtr[:split])
    uty = inner_solver.u.T @ Ytr[:split]
    Xval, Yval = Xtr[split:], Ytr[split:]
    grid = np.sort(np.asarray(cfg.grid, dtype=np.float64))
    scores = np.stack([pearson_per_voxel(Xval @ inner_solver.solve(uty, lam), Yval) for lam in grid])
    lam = grid[np.argmax(scores, axis=0)]
    degenerate = Yval.std(axis=0) == 0
    lam[degenerate] = grid[-1]

    solver = _SvdRidge(Xtr)
    fit = RidgeFit(weights=solver.solve_per_voxel(Ytr, lam), lam=lam, degenerate=degenerate)
    pred = np.full((n, series.v), np.nan)
    pred[test_idx] = x_std.apply(X[test_idx]) @ fit.weights
    truth = np.full((n, series.v), np.nan)
    truth[test_idx] = y_std.apply(Y[test_idx])

    per_feature = discourse_analysis(
        pred,
        truth,
        labels,
        timing,
        series.runs,
        series.tr_seconds,
        count=cfg.sample_count,
        seed=cfg.seed,
        include_random=cfg.include_random,
    )
    return BalancedResult(per_feature=per_feature, train_idx=train_idx, test_idx=test_idx, fit=fit)
