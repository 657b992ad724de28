"""Input validation helpers for the estimator-facing API."""

from __future__ import annotations

import numpy as np

from .errors import ShapeError


def check_image(x, name: str = "X", dtype=np.float32) -> np.ndarray:
    """Coerce one image to a (3, h, w) float array."""
    arr = np.asarray(x, dtype=dtype)
    if arr.ndim == 4 and arr.shape[0] == 1:
        arr = arr[0]
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise ShapeError(f"{name}: expected a (3, h, w) RGB image, got shape {np.asarray(x).shape}")
    return arr


def check_image_batch(X, name: str = "X", dtype=np.float32) -> list[np.ndarray]:
    """Coerce a batch to a list of (3, h, w) arrays.

    Accepts a (n, 3, h, w) array, a single (3, h, w) image, or a sequence of
    images of possibly different sizes.
    """
    if isinstance(X, np.ndarray):
        if X.ndim == 4:
            return [check_image(img, f"{name}[{i}]", dtype) for i, img in enumerate(X)]
        if X.ndim == 3:
            return [check_image(X, name, dtype)]
        raise ShapeError(f"{name}: expected 3-D or 4-D image data, got shape {X.shape}")
    items = list(X)
    if not items:
        raise ShapeError(f"{name}: empty image batch")
    return [check_image(img, f"{name}[{i}]", dtype) for i, img in enumerate(items)]


def check_paired_batches(X, y, x_name: str = "X", y_name: str = "y") -> tuple[list, list]:
    """Validate two image batches that must pair elementwise with equal dims."""
    xs = check_image_batch(X, x_name)
    ys = check_image_batch(y, y_name)
    if len(xs) != len(ys):
        raise ShapeError(f"{x_name} has {len(xs)} images but {y_name} has {len(ys)}")
    for i, (a, b) in enumerate(zip(xs, ys)):
        if a.shape != b.shape:
            raise ShapeError(
                f"pair {i}: {x_name} is {a.shape[1]}x{a.shape[2]} but {y_name} is "
                f"{b.shape[1]}x{b.shape[2]}"
            )
    return xs, ys
