"""Synthetic experiments with known ground truth.

The generator builds word-level features from a low-rank latent signal and
a voxel series that responds linearly to the lagged, TR-averaged latent,
plus white Gaussian noise. Because the response goes through exactly the
same downsampling and lag concatenation as the real preprocessing, a
noiseless experiment is recoverable to numerical precision by the
cross-validated encoder, which is what makes the pipeline testable at desk
scale.

With ``signal_rank=0`` the features carry decoy content only and the
series is pure noise: the null experiment. Per-feature signal scaling
(``feature_snr``) plants discourse features whose alignment ranking is
known by construction.

All ground-truth artifacts are quantized to float32 before the series is
computed, so the saved files reproduce the noiseless series exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ingest
from .datamodel import DiscourseLabels, FeatureMatrix, Run, VoxelSeries, WordTiming
from .preprocess import build_lagged, downsample_to_trs, word_tr_index

# Stream tags keep the generator's RNG draws independent per purpose.
_TAG_GENERATE = 0
_TAG_TWINS = 1
_TAG_SUBJECT = 2
_DECOY_RANK = 10


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *key]))


@dataclass(frozen=True)
class SynthConfig:
    words: int = 5176
    dims: int = 64
    runs: int = 4
    trs_per_run: int | None = None  # derived from the word timing when None
    voxels: int = 500
    noise_sigma: float = 1.0
    signal_rank: int = 10
    lag_profile: tuple[float, ...] = (0.2, 0.4, 0.3, 0.1)
    feature_snr: dict[str, float] = field(default_factory=dict)
    feature_fraction: float = 0.18  # labeled share of word-bearing TRs, per feature
    word_interval: float = 0.5
    tr_seconds: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if min(self.words, self.dims, self.runs, self.voxels) < 1:
            raise ValueError("words, dims, runs, voxels must all be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.signal_rank < 0:
            raise ValueError("signal_rank must be >= 0")


@dataclass(frozen=True)
class GroundTruth:
    """Everything needed to rebuild the noiseless series from files."""

    latent: np.ndarray  # (words, rank) float32
    weights: np.ndarray  # (lag_count * rank, voxels) float32, scaling folded in
    tr_scale: np.ndarray  # (n,) float32, per-TR signal gain from feature_snr
    lag_profile: tuple[float, ...]


@dataclass(frozen=True)
class SynthData:
    config: SynthConfig
    features: FeatureMatrix
    timing: WordTiming
    series: VoxelSeries
    labels: DiscourseLabels
    truth: GroundTruth
    feature_trs: dict[str, np.ndarray]  # planted TR sets, for test introspection


def _geometry(cfg: SynthConfig) -> tuple[tuple[Run, ...], np.ndarray, np.ndarray]:
    """Run ranges plus per-word (onset, run) at the configured timing."""
    base, extra = divmod(cfg.words, cfg.runs)
    words_per_run = [base + (1 if r < extra else 0) for r in range(cfg.runs)]
    onsets, run_of_word, runs = [], [], []
    start = 0
    for r, count in enumerate(words_per_run):
        needed = int(np.ceil(count * cfg.word_interval / cfg.tr_seconds))
        trs = cfg.trs_per_run if cfg.trs_per_run is not None else needed
        if trs < needed:
            raise ValueError(f"run {r}: {count} words need {needed} TRs, got trs_per_run={trs}")
        onsets.extend(i * cfg.word_interval for i in range(count))
        run_of_word.extend([r] * count)
        runs.append((start, start + trs))
        start += trs
    return tuple(runs), np.asarray(onsets, dtype=np.float64), np.asarray(run_of_word, dtype=np.int64)


def generate(cfg: SynthConfig) -> SynthData:
    """Build one synthetic subject, deterministically under cfg.seed."""
    rng = _rng(cfg.seed, _TAG_GENERATE)
    runs, onsets, run_of_word = _geometry(cfg)
    timing = WordTiming(onsets=onsets, run_of_word=run_of_word, word_interval=cfg.word_interval)
    n = runs[-1][1]
    rank = cfg.signal_rank
    lag_count = len(cfg.lag_profile)

    # Latent word signal; rank 0 swaps in decoy content that never reaches
    # the series, so the features stay realistic while the series is noise.
    x_rank = rank if rank >= 1 else _DECOY_RANK
    latent = rng.standard_normal((cfg.words, x_rank))
    latent -= latent.mean(axis=0)
    latent32 = latent.astype(np.float32)
    mixing = rng.standard_normal((x_rank, cfg.dims))
    features = (latent32.astype(np.float64) @ mixing).astype(np.float32)

    # Planted discourse features: disjoint TR sets over word-bearing TRs,
    # then every word inside a chosen TR carries the label.
    word_trs = word_tr_index(timing, runs, cfg.tr_seconds)
    stim_trs = np.unique(word_trs)
    per_feature = int(cfg.feature_fraction * stim_trs.size)
    names = sorted(cfg.feature_snr)
    if per_feature * len(names) > stim_trs.size:
        raise ValueError("feature_fraction too large for disjoint feature TR sets")
    shuffled = rng.permutation(stim_trs)
    feature_trs: dict[str, np.ndarray] = {}
    label_vecs: dict[str, np.ndarray] = {}
    tr_scale = np.ones(n, dtype=np.float64)
    for i, name in enumerate(names):
        chosen = np.sort(shuffled[i * per_feature : (i + 1) * per_feature])
        feature_trs[name] = chosen
        vec = np.zeros(cfg.words, dtype=np.uint8)
        vec[np.isin(word_trs, chosen)] = 1
        label_vecs[name] = vec
        tr_scale[chosen] = cfg.feature_snr[name]
    tr_scale32 = tr_scale.astype(np.float32)
    labels = DiscourseLabels(features=label_vecs, n_words=cfg.words)

    # Series = per-TR-scaled linear response to the lagged latent + noise.
    raw_weights = rng.standard_normal((lag_count * rank, cfg.voxels))
    noise = rng.standard_normal((n, cfg.voxels))
    if rank >= 1:
        latent_tr = downsample_to_trs(latent32.astype(np.float64), timing, runs, cfg.tr_seconds)
        lagged = build_lagged(latent_tr, runs, lag_count).values.astype(np.float64)
        profile = np.repeat(np.asarray(cfg.lag_profile, dtype=np.float64), rank)
        shaped = raw_weights * profile[:, None]
        base_signal = lagged @ shaped
        scale = base_signal.std() or 1.0
        weights32 = (shaped / scale).astype(np.float32)
        signal = (lagged @ weights32.astype(np.float64)) * tr_scale32.astype(np.float64)[:, None]
    else:
        weights32 = np.zeros((0, cfg.voxels), dtype=np.float32)
        signal = np.zeros((n, cfg.voxels))
    values = (signal + cfg.noise_sigma * noise).astype(np.float32)
    series = VoxelSeries(values=values, runs=runs, tr_seconds=cfg.tr_seconds)

    truth = GroundTruth(
        # The decoy latent shapes the features only; the true signal latent
        # is empty at rank 0.
        latent=latent32 if rank >= 1 else np.zeros((cfg.words, 0), dtype=np.float32),
        weights=weights32,
        tr_scale=tr_scale32,
        lag_profile=cfg.lag_profile,
    )
    return SynthData(
        config=cfg,
        features=FeatureMatrix(values=features, model="synth", layer=1, sequence_length=1),
        timing=timing,
        series=series,
        labels=labels,
        truth=truth,
        feature_trs=feature_trs,
    )


def noiseless_series(truth: GroundTruth, timing: WordTiming, runs: tuple[Run, ...], tr_seconds: float = 2.0) -> np.ndarray:
    """Rebuild the noiseless response from ground-truth artifacts alone."""
    latent_tr = downsample_to_trs(truth.latent.astype(np.float64), timing, runs, tr_seconds)
    lagged = build_lagged(latent_tr, runs, len(truth.lag_profile)).values.astype(np.float64)
    return (lagged @ truth.weights.astype(np.float64)) * truth.tr_scale.astype(np.float64)[:, None]


def subject_series(data: SynthData, subject_index: int) -> VoxelSeries:
    """A further subject for the same stimulus: same noiseless response,
    fresh measurement noise drawn from a per-subject stream."""
    cfg = data.config
    signal = noiseless_series(data.truth, data.timing, data.series.runs, cfg.tr_seconds)
    noise = _rng(cfg.seed, _TAG_SUBJECT, subject_index).standard_normal(signal.shape)
    values = (signal + cfg.noise_sigma * noise).astype(np.float32)
    return VoxelSeries(values=values, runs=data.series.runs, tr_seconds=cfg.tr_seconds)


def twin_subjects(cfg: SynthConfig, n_subjects: int, shared_fraction: float) -> list[VoxelSeries]:
    """Subjects mixing one shared low-rank signal with private noise.

    Each subject is sqrt(rho) * shared + sqrt(1 - rho) * private,
    standardized per voxel. rho = 1 yields identical subjects; rho = 0
    yields independent noise.
    """
    if n_subjects < 2:
        raise ValueError("twin_subjects: need at least 2 subjects")
    if not 0.0 <= shared_fraction <= 1.0:
        raise ValueError("twin_subjects: shared_fraction must lie in [0, 1]")
    rng = _rng(cfg.seed, _TAG_TWINS)
    runs, _, _ = _geometry(cfg)
    n = runs[-1][1]
    rank = max(cfg.signal_rank, 1)
    latent = rng.standard_normal((n, rank))
    mixing = rng.standard_normal((rank, cfg.voxels))
    shared = latent @ mixing
    std = shared.std(axis=0)
    shared /= np.where(std > 0, std, 1.0)
    subjects = []
    for _ in range(n_subjects):
        private = rng.standard_normal((n, cfg.voxels))
        mix = np.sqrt(shared_fraction) * shared + np.sqrt(1.0 - shared_fraction) * private
        mix -= mix.mean(axis=0)
        std = mix.std(axis=0)
        mix /= np.where(std > 0, std, 1.0)
        subjects.append(VoxelSeries(values=mix.astype(np.float32), runs=runs, tr_seconds=cfg.tr_seconds))
    return subjects


# ---------------------------------------------------------------------------
# Dataset files


def save_dataset(data: SynthData, out_dir: str | Path) -> dict[str, str]:
    """Write the generated experiment in the pipeline's own file formats."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "features": str(out / "features.fmat"),
        "voxels": str(out / "voxels.fmat"),
        "runs": str(out / "runs.tsv"),
        "timing": str(out / "timing.tsv"),
        "labels": str(out / "labels.tsv"),
        "truth_latent": str(out / "truth_latent.fmat"),
        "truth_weights": str(out / "truth_weights.fmat"),
        "truth_tr_scale": str(out / "truth_tr_scale.fmat"),
    }
    ingest.write_feature_matrix(paths["features"], data.features)
    ingest.write_voxel_series(paths["voxels"], paths["runs"], data.series)
    ingest.write_word_timing(paths["timing"], data.timing)
    ingest.write_labels(paths["labels"], data.labels)
    truth_meta = {"lag_profile": list(data.truth.lag_profile)}
    ingest.write_fmat(paths["truth_latent"], data.truth.latent, meta=truth_meta)
    ingest.write_fmat(paths["truth_weights"], data.truth.weights, meta=truth_meta)
    ingest.write_fmat(paths["truth_tr_scale"], data.truth.tr_scale.reshape(-1, 1), meta=truth_meta)
    return paths


def load_ground_truth(out_dir: str | Path) -> GroundTruth:
    out = Path(out_dir)
    latent, meta = ingest.read_fmat(out / "truth_latent.fmat")
    weights, _ = ingest.read_fmat(out / "truth_weights.fmat")
    tr_scale, _ = ingest.read_fmat(out / "truth_tr_scale.fmat")
    return GroundTruth(
        latent=latent,
        weights=weights,
        tr_scale=tr_scale.ravel(),
        lag_profile=tuple(meta["lag_profile"]),
    )
