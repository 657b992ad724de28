"""Gaussian and Laplacian image pyramids with an exact reconstruction identity.

Levels run finest (level 1, the image itself) to coarsest (level N). Spatial
dims follow the iterated ceil-halving law; decimation keeps even indices and
upsampling takes an explicit target size, so odd sizes are never ambiguous.
"""

from __future__ import annotations

import numpy as np

from .autodiff import (
    Tensor,
    avg2_axis,
    decimate2,
    reflect_pad_axis,
    relu_clamp,
    scale,
    sub,
    add,
    zero_upsample,
)
from .errors import ShapeError

# Fixed 5-tap smoothing kernel, applied separably along height then width
# under symmetric padding. Evaluated as a cascade of four two-tap averages
# (binomial factorization), which applies exactly this kernel while keeping
# constant inputs bit-exact and never overshooting the input range.
SMOOTHING_TAPS = np.array([0.0625, 0.25, 0.375, 0.25, 0.0625])


def smooth(img: Tensor, gain: float = 1.0) -> Tensor:
    """Separable smoothing with SMOOTHING_TAPS (times ``gain``) on both spatial axes."""
    x = img
    for axis in (2, 3):
        x = reflect_pad_axis(x, 2, axis)
        for _ in range(4):
            x = avg2_axis(x, axis)
    if gain != 1.0:
        x = scale(x, gain)
    return x


def gaussian_downsample(img: Tensor) -> Tensor:
    """Smooth, then keep even rows/columns; output dims are ceil(h/2), ceil(w/2)."""
    return decimate2(smooth(img))


def upsample_to(img: Tensor, target_h: int, target_w: int) -> Tensor:
    """Zero-insertion to the target size followed by doubled-kernel smoothing.

    The per-axis kernel is 2x SMOOTHING_TAPS (gain 4 over both axes), the
    adjoint-style companion of :func:`gaussian_downsample`: constants are
    preserved exactly, including at borders.
    """
    return smooth(zero_upsample(img, target_h, target_w), gain=4.0)


def level_shapes(height: int, width: int, levels: int) -> list[tuple[int, int]]:
    """Spatial dims of each pyramid level: iterated ceil-halving of the base dims."""
    shapes = [(height, width)]
    for _ in range(levels - 1):
        h, w = shapes[-1]
        shapes.append(((h + 1) // 2, (w + 1) // 2))
    return shapes


def gaussian_pyramid(img: Tensor, levels: int) -> list[Tensor]:
    """Repeatedly downsample; level 1 is the image itself."""
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    out = [img]
    for _ in range(levels - 1):
        out.append(gaussian_downsample(out[-1]))
    return out


def laplacian_decompose(img: Tensor, levels: int) -> tuple[list[Tensor], list[Tensor]]:
    """Split an image into band-pass residuals plus the coarsest Gaussian level.

    Returns ``(laplacian, gaussian)`` pyramids. Laplacian level n is
    G_n - upsample(G_{n+1}) for n < N; level N equals G_N, so summing back up
    reconstructs the image exactly.
    """
    gauss = gaussian_pyramid(img, levels)
    lap = []
    for n in range(levels - 1):
        up = upsample_to(gauss[n + 1], gauss[n].shape[2], gauss[n].shape[3])
        lap.append(sub(gauss[n], up))
    lap.append(gauss[-1])
    return lap, gauss


def gaussian_reconstruct(laplacian: list[Tensor], clamp: bool = True) -> list[Tensor]:
    """Rebuild all Gaussian levels from a Laplacian pyramid.

    With ``clamp`` set, each level is passed through max(0, x) as it is
    produced; leave it off to get the exact round-trip inverse of
    :func:`laplacian_decompose`. Level 1 of the result is the full image.
    """
    if not laplacian:
        raise ValueError("laplacian pyramid is empty")
    _check_chain(laplacian)
    top = laplacian[-1]
    gauss = [relu_clamp(top) if clamp else top]
    for n in range(len(laplacian) - 2, -1, -1):
        lap = laplacian[n]
        up = upsample_to(gauss[-1], lap.shape[2], lap.shape[3])
        level = add(lap, up)
        gauss.append(relu_clamp(level) if clamp else level)
    gauss.reverse()
    return gauss


def _check_chain(levels: list[Tensor]) -> None:
    for n in range(len(levels) - 1):
        h, w = levels[n].shape[2], levels[n].shape[3]
        hn, wn = levels[n + 1].shape[2], levels[n + 1].shape[3]
        if hn != (h + 1) // 2 or wn != (w + 1) // 2:
            raise ShapeError(
                f"pyramid level {n + 2} has dims {hn}x{wn}, expected "
                f"{(h + 1) // 2}x{(w + 1) // 2} below level {n + 1} ({h}x{w})"
            )
        if levels[n + 1].shape[:2] != levels[n].shape[:2]:
            raise ShapeError("pyramid levels must share batch and channel counts")
