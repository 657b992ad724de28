"""Laplacian-pyramid recursive-residual network for single-image deraining.

A self-contained training and inference engine: pyramid decomposition, tiny
per-level sub-networks, a reverse-mode tape for end-to-end training with a
combined L1 + SSIM objective, and synthetic data so everything is testable
offline. See :class:`PyramidDerainer` for the high-level estimator API and
``pyrderain --help`` for the batch CLI.
"""

from .autodiff import (
    PRECISIONS,
    ConvSpec,
    Tape,
    Tensor,
    conv2d,
    finite_difference_check,
    leaky_relu,
    relu_clamp,
    resolve_precision,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .data import PairedCorpus, RainParams, build_corpus, load_image, random_scene, save_image, synthesize_rain
from .errors import CheckpointError, ConfigError, DataError, NumericError, ShapeError
from .estimator import LaplacianPyramid, PyramidDerainer
from .losses import LossReport, SsimConfig, combined_loss, l1_loss, psnr, ssim, ssim_value
from .model import (
    ModelConfig,
    ModelParams,
    SubnetParams,
    count_parameters,
    init_params,
    net_forward,
    subnet_forward,
)
from .optim import AdamState, adam_step
from .pyramid import (
    SMOOTHING_TAPS,
    gaussian_downsample,
    gaussian_pyramid,
    gaussian_reconstruct,
    laplacian_decompose,
    upsample_to,
)
from .train import TrainConfig, TrainResult, sample_patch_batch, train

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "CheckpointError",
    "ConfigError",
    "ConvSpec",
    "DataError",
    "LaplacianPyramid",
    "LossReport",
    "ModelConfig",
    "ModelParams",
    "NumericError",
    "PRECISIONS",
    "PairedCorpus",
    "PyramidDerainer",
    "RainParams",
    "ShapeError",
    "SMOOTHING_TAPS",
    "SsimConfig",
    "SubnetParams",
    "Tape",
    "Tensor",
    "TrainConfig",
    "TrainResult",
    "adam_step",
    "build_corpus",
    "combined_loss",
    "conv2d",
    "count_parameters",
    "finite_difference_check",
    "gaussian_downsample",
    "gaussian_pyramid",
    "gaussian_reconstruct",
    "init_params",
    "l1_loss",
    "laplacian_decompose",
    "leaky_relu",
    "load_checkpoint",
    "load_image",
    "net_forward",
    "psnr",
    "random_scene",
    "relu_clamp",
    "resolve_precision",
    "save_checkpoint",
    "save_image",
    "sample_patch_batch",
    "ssim",
    "ssim_value",
    "subnet_forward",
    "synthesize_rain",
    "train",
    "upsample_to",
]
