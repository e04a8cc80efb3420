"""From word-level features to the TR-level lagged design matrix.

The transformation chain is: PCA to ``k`` components over all words, then
averaging word rows into the TR grid of each run, then concatenating the
features of the previous ``lag_count`` TRs (zero-padded at run starts) to
absorb the hemodynamic lag. With the defaults (k=10, 4 lags) the design
has 40 columns.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .datamodel import DesignMatrix, FeatureMatrix, Run, WordTiming

# Columns whose training standard deviation falls below this are treated as
# constant and mapped to zero instead of being rescaled into noise.
_CONST_STD = 1e-12


@dataclass(frozen=True)
class PcaModel:
    """Top-k principal directions of a centered feature matrix.

    ``components`` rows are orthonormal; each row's sign is fixed so that
    its largest-magnitude entry is positive, which makes refits bit-stable.
    """

    mean: np.ndarray  # (d,)
    components: np.ndarray  # (k, d), orthonormal rows
    explained_variance_ratio: np.ndarray  # (k,), non-increasing

    @property
    def k(self) -> int:
        return self.components.shape[0]


def fit_pca(features: FeatureMatrix | np.ndarray, k: int = 10) -> PcaModel:
    """Fit the top-k right singular directions of the centered matrix."""
    X = np.asarray(features.values if isinstance(features, FeatureMatrix) else features, dtype=np.float64)
    rows, cols = X.shape
    if k < 1 or k >= min(rows, cols):
        raise ValueError(f"fit_pca: k={k} must be in [1, min(rows, cols)={min(rows, cols)})")
    mean = X.mean(axis=0)
    _, s, vt = np.linalg.svd(X - mean, full_matrices=False)
    components = vt[:k].copy()
    # Deterministic sign: the largest-|entry| of every component is positive.
    flip = components[np.arange(k), np.abs(components).argmax(axis=1)] < 0
    components[flip] *= -1.0
    total = float((s**2).sum())
    ratios = (s[:k] ** 2 / total) if total > 0 else np.zeros(k)
    return PcaModel(mean=mean, components=components, explained_variance_ratio=ratios)


def apply_pca(model: PcaModel, features: FeatureMatrix | np.ndarray) -> np.ndarray:
    """Project rows onto the fitted components: (X - mean) @ components.T."""
    X = np.asarray(features.values if isinstance(features, FeatureMatrix) else features, dtype=np.float64)
    if X.shape[1] != model.mean.shape[0]:
        raise ValueError(f"apply_pca: {X.shape[1]} columns, model expects {model.mean.shape[0]}")
    return (X - model.mean) @ model.components.T


def word_tr_index(timing: WordTiming, runs: Sequence[Run], tr_seconds: float = 2.0) -> np.ndarray:
    """Map every word to the global index of the TR window it falls in.

    A word at onset ``o`` in run ``r`` lands in the window
    [t * tr, (t + 1) * tr) of that run. Words outside their run's bounds are
    an error; the stimulus has no words in inter-run breaks.
    """
    trs = np.empty(timing.n_words, dtype=np.int64)
    for i in range(timing.n_words):
        run = int(timing.run_of_word[i])
        if run >= len(runs):
            raise ValueError(f"word {i}: run {run} not in geometry with {len(runs)} runs")
        start, end = runs[run]
        local = int(timing.onsets[i] // tr_seconds)
        tr = start + local
        if not start <= tr < end:
            raise ValueError(f"word {i}: onset {timing.onsets[i]} falls outside run {run}")
        trs[i] = tr
    return trs


def downsample_to_trs(
    reduced: np.ndarray,
    timing: WordTiming,
    runs: Sequence[Run],
    tr_seconds: float = 2.0,
) -> np.ndarray:
    """Average word rows into their TR windows; empty TRs become zero rows."""
    reduced = np.asarray(reduced, dtype=np.float64)
    if reduced.shape[0] != timing.n_words:
        raise ValueError(f"downsample_to_trs: {reduced.shape[0]} rows for {timing.n_words} words")
    n = runs[-1][1]
    trs = word_tr_index(timing, runs, tr_seconds)
    sums = np.zeros((n, reduced.shape[1]))
    counts = np.zeros(n)
    np.add.at(sums, trs, reduced)
    np.add.at(counts, trs, 1.0)
    nonempty = counts > 0
    sums[nonempty] /= counts[nonempty, None]
    return sums


def build_lagged(tr_features: np.ndarray, runs: Sequence[Run], lag_count: int = 4) -> DesignMatrix:
    """Concatenate the previous ``lag_count`` TRs of features, per run.

    Row t holds (f[t-1], f[t-2], ..., f[t-lag_count]); slots that would
    reach before the start of the row's own run are zero. Lags never cross
    run boundaries.
    """
    if lag_count < 1:
        raise ValueError("build_lagged: lag_count must be >= 1")
    tr_features = np.asarray(tr_features, dtype=np.float64)
    n, k = tr_features.shape
    if runs[-1][1] != n:
        raise ValueError(f"build_lagged: {n} rows but runs end at {runs[-1][1]}")
    out = np.zeros((n, lag_count * k))
    for start, end in runs:
        for lag in range(1, lag_count + 1):
            if end - lag <= start:
                continue  # run shorter than this lag; whole block stays zero
            block = slice((lag - 1) * k, lag * k)
            out[start + lag : end, block] = tr_features[start : end - lag]
    return DesignMatrix(values=out.astype(np.float32), lag_count=lag_count, n_components=k)


@dataclass(frozen=True)
class Standardizer:
    """Per-column mean/std fit on training rows only. Constant columns are
    flagged and mapped to zero rather than divided by ~0."""

    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray  # bool, per column

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = (X - self.mean) / self.std
        out[:, self.constant] = 0.0
        return out


def standardize_fit(X: np.ndarray, train_rows: np.ndarray) -> Standardizer:
    """Fit column statistics on the given rows (population std)."""
    train_rows = np.asarray(train_rows)
    if train_rows.size == 0:
        raise ValueError("standardize_fit: train_rows is empty")
    sub = np.asarray(X, dtype=np.float64)[train_rows]
    mean = sub.mean(axis=0)
    std = sub.std(axis=0)
    constant = std <= _CONST_STD
    return Standardizer(mean=mean, std=np.where(constant, 1.0, std), constant=constant)


def standardize_apply(standardizer: Standardizer, X: np.ndarray) -> np.ndarray:
    return standardizer.apply(X)
