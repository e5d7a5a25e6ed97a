"""Online action recognition with weighted covariance descriptors."""

from ._core import (
    CovactError,
    CovarianceState,
    JointLayout,
    Recognizer,
    batch_weighted_covariance,
    evaluate,
    frame_weight,
    learn_projection,
    load_model,
    normalize_skeleton,
    regularize,
    stein_divergence,
    synth,
    train,
)

__all__ = [
    "CovactError",
    "CovarianceState",
    "JointLayout",
    "Recognizer",
    "batch_weighted_covariance",
    "evaluate",
    "frame_weight",
    "learn_projection",
    "load_model",
    "normalize_skeleton",
    "regularize",
    "stein_divergence",
    "synth",
    "train",
]
