"""Patch-based single-image super-resolution with joint generalized
Gaussian mixture models.

The library learns a mixture over concatenated HR/LR patch vectors with
an EM algorithm whose M-step combines fixed-point updates of the mean
and covariance with a Newton-Raphson update of the shape parameter, and
reconstructs high-resolution images through closed-form MMSE
conditional estimates.  No knowledge of the downsampling operator is
required at reconstruction time.
"""

from .conditional import (
    BlockPartition,
    ConditionalGgd,
    MmseConditioner,
    conditional_params,
    lr_block_params,
    mmse_estimate,
    select_component,
)
from .ggd import BETA_MAX, BETA_MIN, GgdParams, log_norm_const
from .image import degrade, load_pgm, psnr, save_pgm, upsample_nearest
from .mixture import (
    EmConfig,
    FitReport,
    Ggmm,
    beta_score,
    e_step,
    fit,
    fit_component,
    fp_update_cov,
    fp_update_mean,
    init_model,
    m_step_weights,
    neg_mean_log_likelihood,
    newton_update_beta,
)
from .pipeline import (
    JointModel,
    PatchGeometry,
    aggregate,
    aggregation_weights,
    build_joint_samples,
    crop_training_quarter,
    estimate_hr_patches,
    extract_patches,
    super_resolve,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "BETA_MAX",
    "BETA_MIN",
    "BlockPartition",
    "ConditionalGgd",
    "EmConfig",
    "FitReport",
    "GgdParams",
    "Ggmm",
    "JointModel",
    "MmseConditioner",
    "PatchGeometry",
    "aggregate",
    "aggregation_weights",
    "beta_score",
    "build_joint_samples",
    "conditional_params",
    "crop_training_quarter",
    "degrade",
    "e_step",
    "estimate_hr_patches",
    "extract_patches",
    "fit",
    "fit_component",
    "fp_update_cov",
    "fp_update_mean",
    "init_model",
    "load_pgm",
    "log_norm_const",
    "lr_block_params",
    "m_step_weights",
    "mmse_estimate",
    "neg_mean_log_likelihood",
    "newton_update_beta",
    "psnr",
    "save_pgm",
    "select_component",
    "super_resolve",
    "train",
    "upsample_nearest",
]
