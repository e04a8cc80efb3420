"""Ridge regression with run-wise nested cross-validation.

The outer loop holds out one run per fold, trimming TRs from both ends of
the held-out run so nothing near the test boundary is used anywhere. The
inner loop (leave one training run out) picks a per-voxel regularization
strength from a shared grid. A single SVD of the design is reused across
the whole grid and all voxels.

There is no intercept: both the design and the voxel series are
standardized per training fold, which absorbs it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .datamodel import DesignMatrix, Fold, FoldPlan, VoxelSeries
from .preprocess import Standardizer, standardize_fit

DEFAULT_LAMBDA_GRID = tuple(float(x) for x in np.logspace(-3.0, 6.0, 10))


@dataclass(frozen=True)
class RidgeFit:
    """Ridge solution; ``lam`` is per voxel (a scalar fit broadcasts)."""

    weights: np.ndarray  # (p features, v voxels)
    lam: np.ndarray  # (v,), > 0
    degenerate: np.ndarray | None = None  # (v,), True where lambda fell back to the grid max

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.weights


class _SvdRidge:
    """SVD of one design matrix, shared across lambdas and voxels."""

    def __init__(self, X: np.ndarray):
        X = np.asarray(X, dtype=np.float64)
        if not np.isfinite(X).all():
            raise ValueError("ridge: non-finite design values")
        self.u, self.s, self.vt = np.linalg.svd(X, full_matrices=False)

    def solve(self, uty: np.ndarray, lam: float) -> np.ndarray:
        # W = V diag(s / (s^2 + lam)) U^T Y, computed from a cached U^T Y.
        shrink = self.s / (self.s**2 + lam)
        return (self.vt.T * shrink) @ uty

    def solve_per_voxel(self, Y: np.ndarray, lam: np.ndarray) -> np.ndarray:
        uty = self.u.T @ Y
        weights = np.empty((self.vt.shape[1], Y.shape[1]))
        for value in np.unique(lam):
            cols = lam == value
            weights[:, cols] = self.solve(uty[:, cols], float(value))
        return weights


def make_fold_plan(series: VoxelSeries, trim: int = 10) -> FoldPlan:
    """One fold per run: test the run minus ``trim`` TRs at each end, train
    on the remaining runs in full."""
    if trim < 0:
        raise ValueError("make_fold_plan: trim must be >= 0")
    folds = []
    for held_out, (start, end) in enumerate(series.runs):
        if end - start <= 2 * trim:
            raise ValueError(
                f"make_fold_plan: run {held_out} has {end - start} TRs, too short for trim={trim}"
            )
        test = np.arange(start + trim, end - trim, dtype=np.int64)
        train = np.concatenate(
            [np.arange(s, e, dtype=np.int64) for r, (s, e) in enumerate(series.runs) if r != held_out]
        )
        folds.append(Fold(train=train, test=test))
    return FoldPlan(folds=tuple(folds), trim=trim)


def ridge_fit(Xtrain: np.ndarray, Ytrain: np.ndarray, lam: float | np.ndarray) -> RidgeFit:
    """Solve min ||Y - XW||^2 + lam ||W||^2 via SVD."""
    Y = np.asarray(Ytrain, dtype=np.float64)
    if not np.isfinite(Y).all():
        raise ValueError("ridge_fit: non-finite targets")
    solver = _SvdRidge(Xtrain)
    lam_vec = np.broadcast_to(np.asarray(lam, dtype=np.float64), (Y.shape[1],)).copy()
    if (lam_vec <= 0).any():
        raise ValueError("ridge_fit: lambda must be > 0")
    weights = solver.solve_per_voxel(Y, lam_vec)
    return RidgeFit(weights=weights, lam=lam_vec)


def _fast_pearson_columns(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-column correlation with zero-variance columns mapped to 0."""
    a = a - a.mean(axis=0)
    b = b - b.mean(axis=0)
    na = np.sqrt((a**2).sum(axis=0))
    nb = np.sqrt((b**2).sum(axis=0))
    denom = na * nb
    ok = denom > 0
    out = np.zeros(a.shape[1])
    out[ok] = (a * b).sum(axis=0)[ok] / denom[ok]
    return out


def select_lambda(
    Xtrain: np.ndarray,
    Ytrain: np.ndarray,
    train_runs: Sequence[np.ndarray],
    grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
) -> tuple[np.ndarray, np.ndarray]:
    """Pick a per-voxel lambda by leave-one-training-run-out validation.

    For every voxel the grid value with the highest mean inner-fold Pearson
    wins; exact ties go to the smallest lambda. Voxels whose held-out truth
    has no variance in some inner fold cannot be scored and fall back to
    the largest grid value, flagged in the returned mask.

    Args:
        Xtrain: (n, p) standardized training design.
        Ytrain: (n, v) standardized training targets.
        train_runs: index arrays into the rows of Xtrain, one per run.
        grid: positive regularization strengths.

    Returns:
        (lam, degenerate): per-voxel lambda and fallback flags.
    """
    grid = np.sort(np.asarray(list(grid), dtype=np.float64))
    if grid.size == 0 or (grid <= 0).any():
        raise ValueError("select_lambda: grid must be non-empty and positive")
    if len(train_runs) < 2:
        raise ValueError("select_lambda: need at least 2 training runs for inner folds")
    X = np.asarray(Xtrain, dtype=np.float64)
    Y = np.asarray(Ytrain, dtype=np.float64)
    v = Y.shape[1]
    scores = np.zeros((grid.size, v))
    degenerate = np.zeros(v, dtype=bool)
    for held_out in range(len(train_runs)):
        val_rows = train_runs[held_out]
        fit_rows = np.concatenate([train_runs[r] for r in range(len(train_runs)) if r != held_out])
        solver = _SvdRidge(X[fit_rows])
        uty = solver.u.T @ Y[fit_rows]
        Xval, Yval = X[val_rows], Y[val_rows]
        # Scale-aware zero-variance check; exact comparison misses constant
        # columns whose mean rounds.
        degenerate |= Yval.std(axis=0) <= 1e-12 * np.maximum(1.0, np.abs(Yval.mean(axis=0)))
        for g, lam in enumerate(grid):
            pred = Xval @ solver.solve(uty, float(lam))
            scores[g] += _fast_pearson_columns(pred, Yval)
    # argmax over mean score; with an ascending grid, ties resolve small.
    lam = grid[np.argmax(scores, axis=0)]
    lam[degenerate] = grid[-1]
    return lam, degenerate


@dataclass(frozen=True)
class FoldResult:
    """Held-out predictions for one fold, in standardized target space."""

    fold: int
    test_idx: np.ndarray
    pred: np.ndarray  # (len(test_idx), v)
    truth: np.ndarray  # (len(test_idx), v), test targets under train statistics
    fit: RidgeFit
    x_standardizer: Standardizer
    y_standardizer: Standardizer


@dataclass(frozen=True)
class CvResult:
    """All folds of one cross-validated encoding fit."""

    folds: tuple[FoldResult, ...]
    n: int

    def assemble(self) -> tuple[np.ndarray, np.ndarray]:
        """Full-length (pred, truth) arrays; TRs in no test set are NaN."""
        v = self.folds[0].pred.shape[1]
        pred = np.full((self.n, v), np.nan)
        truth = np.full((self.n, v), np.nan)
        for fr in self.folds:
            pred[fr.test_idx] = fr.pred
            truth[fr.test_idx] = fr.truth
        return pred, truth

    @property
    def pred_by_fold(self) -> list[np.ndarray]:
        return [fr.pred for fr in self.folds]


def _runs_within(rows: np.ndarray, runs: Sequence[tuple[int, int]]) -> list[np.ndarray]:
    """Positions of each run's TRs inside the subset ``rows``."""
    out = []
    for start, end in runs:
        pos = np.flatnonzero((rows >= start) & (rows < end))
        if pos.size:
            out.append(pos)
    return out


def fit_predict_cv(
    design: DesignMatrix | Sequence[DesignMatrix],
    series: VoxelSeries,
    plan: FoldPlan,
    grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
) -> CvResult:
    """Cross-validated fit: standardize on train rows, select lambda by
    inner CV, fit, and predict the held-out rows of every fold.

    ``design`` is normally one matrix; passing one per fold supports
    fold-specific designs (e.g. leakage-free PCA refit per fold).
    """
    designs: list[DesignMatrix]
    if isinstance(design, DesignMatrix):
        designs = [design] * len(plan.folds)
    else:
        designs = list(design)
        if len(designs) != len(plan.folds):
            raise ValueError(f"fit_predict_cv: {len(designs)} designs for {len(plan.folds)} folds")
    for d in designs:
        if d.rows != series.n:
            raise ValueError(f"fit_predict_cv: design has {d.rows} rows, series has {series.n} TRs")

    results = []
    for f, fold in enumerate(plan.folds):
        X = np.asarray(designs[f].values, dtype=np.float64)
        Y = np.asarray(series.values, dtype=np.float64)
        x_std = standardize_fit(X, fold.train)
        y_std = standardize_fit(Y, fold.train)
        Xtr = x_std.apply(X[fold.train])
        Ytr = y_std.apply(Y[fold.train])
        inner = _runs_within(fold.train, series.runs)
        lam, degenerate = select_lambda(Xtr, Ytr, inner, grid)
        solver = _SvdRidge(Xtr)
        weights = solver.solve_per_voxel(Ytr, lam)
        fit = RidgeFit(weights=weights, lam=lam, degenerate=degenerate)
        Xte = x_std.apply(X[fold.test])
        results.append(
            FoldResult(
                fold=f,
                test_idx=fold.test,
                pred=Xte @ weights,
                truth=y_std.apply(Y[fold.test]),
                fit=fit,
                x_standardizer=x_std,
                y_standardizer=y_std,
            )
        )
    return CvResult(folds=tuple(results), n=series.n)
