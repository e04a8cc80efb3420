import numpy as np
import pytest

from brainalign.datamodel import DiscourseLabels, WordTiming
from brainalign.discourse import (
    RANDOM_CONTROL,
    BalancedConfig,
    balanced_protocol,
    discourse_analysis,
    discourse_pearson,
    label_trs,
    sample_feature_trs,
)
from brainalign.encoder import make_fold_plan, fit_predict_cv
from brainalign.metrics import pearson_per_voxel
from brainalign.preprocess import apply_pca, build_lagged, downsample_to_trs, fit_pca
from brainalign.synth import SynthConfig, generate


def test_label_trs_single_word_window():
    timing = WordTiming(onsets=np.array([1.0]), run_of_word=np.array([0]))
    labels = DiscourseLabels(features={"Motion": np.array([1], dtype=np.uint8)}, n_words=1)
    masks = label_trs(labels, timing, ((0, 3),), tr_seconds=2.0)
    np.testing.assert_array_equal(masks["Motion"], [1, 0, 0])


def test_label_trs_no_labeled_words():
    timing = WordTiming(onsets=np.array([0.0, 0.5]), run_of_word=np.array([0, 0]))
    labels = DiscourseLabels(features={"Emotion": np.zeros(2, dtype=np.uint8)}, n_words=2)
    masks = label_trs(labels, timing, ((0, 2),))
    assert masks["Emotion"].sum() == 0


def test_label_trs_any_word_rule():
    # Two words in the same TR, only one labeled: the TR is still flagged.
    timing = WordTiming(onsets=np.array([0.0, 0.5]), run_of_word=np.array([0, 0]))
    labels = DiscourseLabels(features={"C": np.array([0, 1], dtype=np.uint8)}, n_words=2)
    masks = label_trs(labels, timing, ((0, 1),))
    np.testing.assert_array_equal(masks["C"], [1])


def test_paper_geometry_label_counts_in_range():
    cfg = SynthConfig(
        words=5176,
        dims=12,
        runs=4,
        voxels=2,
        signal_rank=2,
        feature_snr={"Characters": 2.0, "Emotion": 1.5, "Motion": 1.2},
        feature_fraction=0.18,
        seed=0,
    )
    data = generate(cfg)
    masks = label_trs(data.labels, data.timing, data.series.runs)
    for name in ("Characters", "Emotion", "Motion"):
        assert masks[name].sum() >= 200  # comfortably above the 160-TR sample


def test_sample_exact_mask_returns_everything():
    mask = np.zeros(300, dtype=np.uint8)
    chosen = np.random.default_rng(0).choice(300, 160, replace=False)
    mask[chosen] = 1
    for seed in (0, 1, 99):
        np.testing.assert_array_equal(sample_feature_trs(mask, 160, seed), np.sort(chosen))


def test_sample_downsamples_uniformly_and_deterministically():
    mask = np.zeros(400, dtype=np.uint8)
    mask[np.random.default_rng(1).choice(400, 236, replace=False)] = 1
    a = sample_feature_trs(mask, 160, seed=5)
    b = sample_feature_trs(mask, 160, seed=5)
    np.testing.assert_array_equal(a, b)
    assert a.size == 160
    assert np.all(mask[a] == 1)
    c = sample_feature_trs(mask, 160, seed=6)
    assert not np.array_equal(a, c)  # collision odds are hypergeometrically tiny


def test_sample_insufficient_names_feature():
    with pytest.raises(ValueError, match="Characters"):
        sample_feature_trs(np.ones(100, dtype=np.uint8), 160, feature="Characters")


def test_discourse_pearson_restriction_identity():
    rng = np.random.default_rng(2)
    pred = rng.standard_normal((50, 4))
    truth = rng.standard_normal((50, 4))
    all_trs = np.arange(50)
    np.testing.assert_allclose(
        discourse_pearson(pred, truth, all_trs), pearson_per_voxel(pred, truth)
    )


def test_discourse_pearson_perfect_on_sample():
    rng = np.random.default_rng(3)
    truth = rng.standard_normal((200, 3))
    sampled = np.sort(rng.choice(200, 160, replace=False))
    np.testing.assert_allclose(discourse_pearson(truth, truth, sampled), 1.0)


def test_discourse_pearson_rejects_unscored_tr():
    pred = np.full((10, 2), np.nan)
    pred[:5] = 1.0
    with pytest.raises(ValueError, match="lacking a prediction"):
        discourse_pearson(pred, np.zeros((10, 2)), np.array([3, 7]))


def _planted_pipeline(seed=0, snr=None, noise=1.0):
    cfg = SynthConfig(
        words=4800,
        dims=24,
        runs=4,
        voxels=24,
        noise_sigma=noise,
        signal_rank=8,
        feature_snr=snr or {"Characters": 3.0, "Emotion": 1.5, "Motion": 0.75},
        feature_fraction=0.18,
        seed=seed,
    )
    data = generate(cfg)
    pca = fit_pca(data.features, 10)
    tr = downsample_to_trs(apply_pca(pca, data.features), data.timing, data.series.runs)
    design = build_lagged(tr, data.series.runs, 4)
    return data, design


def test_discourse_analysis_fair_counts_and_control():
    data, design = _planted_pipeline(seed=1)
    plan = make_fold_plan(data.series, trim=10)
    cv = fit_predict_cv(design, data.series, plan)
    pred, truth = cv.assemble()
    scores = discourse_analysis(
        pred, truth, data.labels, data.timing, data.series.runs, count=160, seed=0
    )
    assert set(scores) == {"Characters", "Emotion", "Motion", RANDOM_CONTROL}
    for fa in scores.values():
        assert fa.sampled_trs.size == 160  # fairness: identical sample sizes
    # Samples only come from scored TRs.
    scored = ~np.isnan(pred).any(axis=1)
    for fa in scores.values():
        assert scored[fa.sampled_trs].all()


def test_discourse_analysis_ranks_planted_snr():
    data, design = _planted_pipeline(seed=2)
    plan = make_fold_plan(data.series, trim=10)
    cv = fit_predict_cv(design, data.series, plan)
    pred, truth = cv.assemble()
    scores = discourse_analysis(
        pred, truth, data.labels, data.timing, data.series.runs, count=160, seed=0
    )
    assert scores["Characters"].mean > scores["Emotion"].mean > scores["Motion"].mean


def test_discourse_pearson_invariant_to_sample_order():
    rng = np.random.default_rng(4)
    pred = rng.standard_normal((100, 3))
    truth = rng.standard_normal((100, 3))
    sampled = rng.choice(100, 40, replace=False)
    a = discourse_pearson(pred, truth, np.sort(sampled))
    b = discourse_pearson(pred, truth, sampled)
    np.testing.assert_allclose(a, b)


# ---------------------------------------------------------------------------
# Balanced protocol


def test_balanced_split_uses_exact_windows():
    data, design = _planted_pipeline(seed=3)
    cfg = BalancedConfig(sample_count=74, seed=0)
    result = balanced_protocol(design, data.series, data.labels, data.timing, cfg)
    n = data.series.n
    np.testing.assert_array_equal(result.train_idx, np.arange(n - 500, n))
    np.testing.assert_array_equal(result.test_idx, np.arange(0, 700))
    for name, fa in result.per_feature.items():
        assert fa.sampled_trs.size == 74
        assert fa.sampled_trs.max() < 700


def test_balanced_insufficient_feature_trs():
    data, design = _planted_pipeline(seed=4)
    labels = DiscourseLabels(
        features={"Rare": np.r_[np.ones(10, dtype=np.uint8), np.zeros(data.timing.n_words - 10, dtype=np.uint8)]},
        n_words=data.timing.n_words,
    )
    with pytest.raises(ValueError, match="Rare"):
        balanced_protocol(design, data.series, labels, data.timing, BalancedConfig(sample_count=74))


def test_balanced_needs_enough_trs():
    cfg = SynthConfig(words=1600, dims=12, runs=4, voxels=3, signal_rank=2, seed=5)
    data = generate(cfg)
    design = build_lagged(np.zeros((data.series.n, 2)), data.series.runs, 2)
    assert data.series.n < 1200
    with pytest.raises(ValueError, match="need"):
        balanced_protocol(design, data.series, data.labels, data.timing, BalancedConfig())


def test_balanced_ranks_planted_snr():
    data, design = _planted_pipeline(seed=6, noise=0.7)
    result = balanced_protocol(
        design, data.series, data.labels, data.timing, BalancedConfig(sample_count=74, seed=0)
    )
    means = {name: fa.mean for name, fa in result.per_feature.items()}
    assert means["Characters"] > means["Emotion"] > means["Motion"]
