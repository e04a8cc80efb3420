"""Cross-validated voxelwise encoding models and alignment metrics for
language-model features, with a synthetic oracle for desk-scale checks."""

from .datamodel import (
    DesignMatrix,
    DiscourseLabels,
    FeatureMatrix,
    Fold,
    FoldPlan,
    ResultRecord,
    RoiMaskSet,
    VoxelSeries,
    WordTiming,
    validate,
)
from .encoder import (
    DEFAULT_LAMBDA_GRID,
    CvResult,
    RidgeFit,
    fit_predict_cv,
    make_fold_plan,
    ridge_fit,
    select_lambda,
)
from .metrics import (
    NoiseCeiling,
    TwentyVTwentyConfig,
    noise_ceiling,
    noise_ceiling_grid,
    pearson_per_voxel,
    score_cv,
    twenty_v_twenty,
)
from .preprocess import (
    PcaModel,
    Standardizer,
    apply_pca,
    build_lagged,
    downsample_to_trs,
    fit_pca,
    standardize_apply,
    standardize_fit,
)
from .stats import TestOutcome, fdr_bh, one_sample_ttest, paired_ttest, significant_mask
from .discourse import (
    BalancedConfig,
    balanced_protocol,
    discourse_analysis,
    discourse_pearson,
    label_trs,
    sample_feature_trs,
)
from .synth import SynthConfig, SynthData, generate, noiseless_series, twin_subjects

__version__ = "0.1.0"
