"""Closed-form multi-view low-rank ridge regression."""

from .data import (
    ClassIndicator,
    DataError,
    MultiViewDataset,
    PreprocessState,
    apply_preprocess,
    build_class_indicator,
    center,
    fit_preprocess,
    load_manifest,
    normalize_rows,
    save_manifest,
    stratified_split,
    synth_generate,
)
from .eig import EigenPairs, generalized_eig, symmetric_eig
from .predict import accuracy, evaluate, predict, predict_sum, predict_voting, score_views
from .solver import (
    FullRankModel,
    LambdaStrategy,
    LowRankModel,
    build_scatter,
    compute_B,
    compute_bias,
    fit_full_rank,
    fit_low_rank,
    load_model,
    objective_J1,
    residual_r,
    resolve_lambda,
    save_model,
)

__version__ = "0.1.0"
