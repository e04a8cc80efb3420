import numpy as np
import pytest

from brainalign.datamodel import WordTiming
from brainalign.preprocess import (
    apply_pca,
    build_lagged,
    downsample_to_trs,
    fit_pca,
    standardize_apply,
    standardize_fit,
)


def make_timing(words_per_run, interval=0.5):
    onsets, runs = [], []
    for r, count in enumerate(words_per_run):
        onsets.extend(i * interval for i in range(count))
        runs.extend([r] * count)
    return WordTiming(onsets=np.array(onsets), run_of_word=np.array(runs), word_interval=interval)


# ---------------------------------------------------------------------------
# PCA


def test_pca_rank_one_explains_everything():
    u = np.random.default_rng(0).standard_normal(50)
    w = np.random.default_rng(1).standard_normal(8)
    X = np.outer(u, w)
    model = fit_pca(X, k=3)
    assert model.explained_variance_ratio[0] == pytest.approx(1.0, abs=1e-12)
    assert model.explained_variance_ratio[1:] == pytest.approx(0.0, abs=1e-12)


def test_pca_matches_eigendecomposition_oracle():
    # Independent oracle: dense eigendecomposition of the sample covariance.
    rng = np.random.default_rng(42)
    X = rng.standard_normal((100, 20)) @ np.diag(np.linspace(3.0, 0.5, 20))
    centered = X - X.mean(axis=0)
    cov = centered.T @ centered / X.shape[0]
    eigvals = np.sort(np.linalg.eigvalsh(cov))[::-1]

    model = fit_pca(X, k=10)
    projected = apply_pca(model, X)
    variances = projected.var(axis=0)
    np.testing.assert_allclose(variances, eigvals[:10], rtol=1e-10)
    # Ratios against the oracle's full spectrum.
    np.testing.assert_allclose(
        model.explained_variance_ratio, eigvals[:10] / eigvals.sum(), rtol=1e-10
    )


def test_pca_paper_scale_shape():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((5176, 768)).astype(np.float32)
    model = fit_pca(X, k=10)
    assert apply_pca(model, X).shape == (5176, 10)


def test_pca_sign_convention_is_deterministic():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((60, 12))
    a, b = fit_pca(X, k=4), fit_pca(X.copy(), k=4)
    np.testing.assert_array_equal(a.components, b.components)
    peak = a.components[np.arange(4), np.abs(a.components).argmax(axis=1)]
    assert (peak > 0).all()


def test_pca_components_orthonormal_and_ratios_sorted():
    X = np.random.default_rng(9).standard_normal((40, 15))
    model = fit_pca(X, k=6)
    gram = model.components @ model.components.T
    np.testing.assert_allclose(gram, np.eye(6), atol=1e-8)
    ratios = model.explained_variance_ratio
    assert (np.diff(ratios) <= 1e-12).all()
    assert ratios.sum() <= 1.0 + 1e-12


def test_pca_k_bounds():
    X = np.zeros((10, 5))
    with pytest.raises(ValueError):
        fit_pca(X, k=5)
    with pytest.raises(ValueError):
        fit_pca(np.zeros((5, 10)), k=5)


def test_apply_pca_centering_and_basis():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((30, 6))
    model = fit_pca(X, k=2)
    mean_rows = np.tile(model.mean, (4, 1))
    np.testing.assert_allclose(apply_pca(model, mean_rows), 0.0, atol=1e-12)
    single = model.mean + model.components[0]
    np.testing.assert_allclose(apply_pca(model, single[None, :]), [[1.0, 0.0]], atol=1e-10)


def test_apply_pca_variance_matches_direct_recompute():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((80, 9))
    model = fit_pca(X, k=4)
    projected = apply_pca(model, X)
    total_variance = ((X - X.mean(0)) ** 2).sum() / X.shape[0]
    np.testing.assert_allclose(
        projected.var(axis=0), model.explained_variance_ratio * total_variance, rtol=1e-10
    )


def test_reconstruction_error_never_increases_with_k():
    rng = np.random.default_rng(11)
    X = rng.standard_normal((50, 12))
    errors = []
    for k in range(1, 8):
        model = fit_pca(X, k=k)
        projected = apply_pca(model, X)
        recon = projected @ model.components + model.mean
        errors.append(np.linalg.norm(X - recon))
    assert all(e2 <= e1 + 1e-10 for e1, e2 in zip(errors, errors[1:]))


def test_apply_pca_dimension_mismatch():
    model = fit_pca(np.random.default_rng(0).standard_normal((20, 6)), k=2)
    with pytest.raises(ValueError):
        apply_pca(model, np.zeros((3, 5)))


# ---------------------------------------------------------------------------
# Downsampling


def test_downsample_four_words_per_tr():
    timing = make_timing([8])  # onsets 0.0 .. 3.5 in one run of 2 TRs
    runs = ((0, 2),)
    reduced = np.arange(8, dtype=float)[:, None]
    out = downsample_to_trs(reduced, timing, runs, tr_seconds=2.0)
    np.testing.assert_allclose(out[:, 0], [np.mean([0, 1, 2, 3]), np.mean([4, 5, 6, 7])])


def test_downsample_identical_words_equal_row():
    timing = make_timing([4])
    runs = ((0, 1),)
    reduced = np.tile([2.5, -1.0], (4, 1))
    out = downsample_to_trs(reduced, timing, runs, tr_seconds=2.0)
    np.testing.assert_allclose(out, [[2.5, -1.0]])


def test_downsample_empty_tr_is_zero():
    timing = make_timing([4])
    runs = ((0, 3),)  # one extra empty TR at the end plus none in the middle
    out = downsample_to_trs(np.ones((4, 2)), timing, runs, tr_seconds=2.0)
    np.testing.assert_allclose(out[1:], 0.0)


def test_downsample_word_outside_run():
    timing = WordTiming(onsets=np.array([0.0, 4.1]), run_of_word=np.array([0, 0]))
    with pytest.raises(ValueError, match="outside run"):
        downsample_to_trs(np.ones((2, 1)), timing, ((0, 2),), tr_seconds=2.0)


# ---------------------------------------------------------------------------
# Lag concatenation


def test_lag_shape_default_40_columns():
    runs = ((0, 10), (10, 20))
    design = build_lagged(np.ones((20, 10)), runs, lag_count=4)
    assert design.cols == 40


def test_lag_first_tr_of_each_run_is_zero():
    runs = ((0, 5), (5, 10))
    rng = np.random.default_rng(0)
    design = build_lagged(rng.standard_normal((10, 3)), runs, lag_count=4)
    np.testing.assert_array_equal(design.values[0], 0.0)
    np.testing.assert_array_equal(design.values[5], 0.0)


def test_lag_constant_features_repeat():
    runs = ((0, 8),)
    c = np.array([1.5, -2.0])
    design = build_lagged(np.tile(c, (8, 1)), runs, lag_count=4)
    np.testing.assert_allclose(design.values[4:], np.tile(c, (4, 4)))


def test_lag_exact_shift_content():
    runs = ((0, 6),)
    f = np.arange(6, dtype=float)[:, None]
    design = build_lagged(f, runs, lag_count=2).values
    np.testing.assert_allclose(design[:, 0], [0, 0, 1, 2, 3, 4])  # lag 1
    np.testing.assert_allclose(design[:, 1], [0, 0, 0, 1, 2, 3])  # lag 2


def test_lag_never_crosses_run_boundary():
    runs = ((0, 6), (6, 12))
    rng = np.random.default_rng(1)
    f = rng.standard_normal((12, 2))
    base = build_lagged(f, runs, lag_count=3).values
    zeroed = f.copy()
    zeroed[:6] = 0.0  # wipe run 0
    after = build_lagged(zeroed, runs, lag_count=3).values
    np.testing.assert_array_equal(base[6:], after[6:])


def test_lag_rejects_bad_count():
    with pytest.raises(ValueError):
        build_lagged(np.ones((4, 2)), ((0, 4),), lag_count=0)


def test_design_ignores_voxel_values():
    # The design path never touches the series values, only geometry.
    timing = make_timing([8, 8])
    runs = ((0, 2), (2, 4))
    reduced = np.random.default_rng(0).standard_normal((16, 3))
    a = build_lagged(downsample_to_trs(reduced, timing, runs), runs)
    b = build_lagged(downsample_to_trs(reduced, timing, runs), runs)
    np.testing.assert_array_equal(a.values, b.values)


# ---------------------------------------------------------------------------
# Standardizer


def test_standardize_constant_column_flagged_zero():
    X = np.column_stack([np.full(6, 5.0), np.arange(6, dtype=float)])
    std = standardize_fit(X, np.arange(6))
    out = standardize_apply(std, X)
    assert std.constant[0] and not std.constant[1]
    np.testing.assert_array_equal(out[:, 0], 0.0)


def test_standardize_two_point_zscore():
    X = np.array([[1.0], [0.0], [3.0]])
    std = standardize_fit(X, np.array([0, 2]))
    out = standardize_apply(std, X)
    np.testing.assert_allclose(out[[0, 2], 0], [-1.0, 1.0])


def test_standardize_heldout_uses_train_stats_only():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((20, 3)) * 4.0 + 1.0
    train = np.arange(12)
    std = standardize_fit(X, train)
    out = standardize_apply(std, X)
    # Direct recompute oracle.
    mean, sd = X[train].mean(0), X[train].std(0)
    np.testing.assert_allclose(out, (X - mean) / sd, atol=1e-12)
    np.testing.assert_allclose(out[train].mean(0), 0.0, atol=1e-12)
    np.testing.assert_allclose(out[train].std(0), 1.0, atol=1e-12)


def test_standardize_empty_train_rejected():
    with pytest.raises(ValueError):
        standardize_fit(np.ones((3, 1)), np.array([], dtype=int))
