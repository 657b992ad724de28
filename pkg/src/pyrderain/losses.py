"""L1 loss, SSIM (loss and metric), the combined multi-level objective, and PSNR."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .autodiff import Tensor, _check_pair, abs_, add, div, filter_axis, mean, mul, offset, sub
from .errors import ShapeError
from .pyramid import gaussian_pyramid


@dataclass(frozen=True)
class SsimConfig:
    """Constants for the structural similarity index on [0, 1] images."""

    window_size: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2

    @cached_property
    def window_taps(self) -> np.ndarray:
        """1-D Gaussian taps normalized to sum to 1; the 2-D window is their outer product."""
        half = (self.window_size - 1) / 2.0
        x = np.arange(self.window_size) - half
        taps = np.exp(-(x * x) / (2.0 * self.sigma * self.sigma))
        return taps / taps.sum()


DEFAULT_SSIM = SsimConfig()


@dataclass
class LossReport:
    """Per-level loss terms plus the scalar node used for backpropagation."""

    total: float
    per_level_l1: list[float]
    per_level_ssim_loss: list[float]
    node: Tensor


def l1_loss(a: Tensor, b: Tensor) -> Tensor:
    """Mean absolute difference over all elements (batch included)."""
    _check_pair(a, b, "l1_loss")
    return mean(abs_(sub(a, b)))


def _window_mean(x: Tensor, taps: np.ndarray) -> Tensor:
    return filter_axis(filter_axis(x, taps, 2), taps, 3)


def ssim(a: Tensor, b: Tensor, cfg: SsimConfig = DEFAULT_SSIM) -> Tensor:
    """Mean local SSIM index over pixels and channels (RGB treated jointly).

    Local means, variances, and covariance come from a separable Gaussian
    window under symmetric padding, so the index is defined up to the border.
    Symmetric in (a, b) and differentiable.
    """
    _check_pair(a, b, "ssim")
    if a.data.ndim != 4:
        raise ShapeError(f"ssim expects 4-D image tensors, got shape {a.shape}")
    taps = cfg.window_taps
    mu_a = _window_mean(a, taps)
    mu_b = _window_mean(b, taps)
    mu_ab = mul(mu_a, mu_b)
    var_a = sub(_window_mean(mul(a, a), taps), mul(mu_a, mu_a))
    var_b = sub(_window_mean(mul(b, b), taps), mul(mu_b, mu_b))
    cov = sub(_window_mean(mul(a, b), taps), mu_ab)
    lum = div(offset(2.0 * mu_ab, cfg.c1), offset(add(mul(mu_a, mu_a), mul(mu_b, mu_b)), cfg.c1))
    strut = div(offset(2.0 * cov, cfg.c2), offset(add(var_a, var_b), cfg.c2))
    return mean(mul(lum, strut))


def ssim_value(a: Tensor, b: Tensor, cfg: SsimConfig = DEFAULT_SSIM) -> float:
    """SSIM as a plain float, for evaluation paths."""
    return ssim(a, b, cfg).item()


def psnr(a: Tensor, b: Tensor) -> float:
    """Peak signal-to-noise ratio in dB for dynamic range 1.0; +inf when MSE is 0."""
    _check_pair(a, b, "psnr")
    mse = float(np.mean(np.square(a.data.astype(np.float64) - b.data.astype(np.float64))))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def combined_loss(
    g_out: list[Tensor],
    y_gt: Tensor,
    cfg: SsimConfig = DEFAULT_SSIM,
    ssim_levels: int = 2,
) -> LossReport:
    """L1 on every reconstructed Gaussian level plus (1 - SSIM) on the finest levels.

    ``g_out`` is the network's Gaussian pyramid; the ground-truth pyramid is
    built here from ``y_gt``. Terms are summed with unit weights; each term is
    already a batch mean.
    """
    if not g_out:
        raise ValueError("g_out pyramid is empty")
    if y_gt.shape != g_out[0].shape:
        raise ShapeError(
            f"ground truth shape {y_gt.shape} does not match pyramid level 1 {g_out[0].shape}"
        )
    levels = len(g_out)
    gt = gaussian_pyramid(y_gt, levels)
    l1_terms = [l1_loss(g_out[n], gt[n]) for n in range(levels)]
    ssim_terms = [
        offset(-ssim(g_out[n], gt[n], cfg), 1.0) for n in range(min(ssim_levels, levels))
    ]
    total = l1_terms[0]
    for term in l1_terms[1:]:
        total = add(total, term)
    for term in ssim_terms:
        total = add(total, term)
    return LossReport(
        total=total.item(),
        per_level_l1=[t.item() for t in l1_terms],
        per_level_ssim_loss=[t.item() for t in ssim_terms],
        node=total,
    )
