"""Shared fixtures and helpers for the test suite."""

import numpy as np
import pytest

from pyrderain import ModelConfig, RainParams, Tensor, init_params
from pyrderain.data import save_image, synthesize_rain, random_scene


def smooth_gradient_state(seed=11, gain=0.5, b0=0.5, bias=0.05, precision="f64"):
    """A parameter state where every pre-activation sits far from a kink.

    Weights are made positive and row-normalized to a fixed gain, and biases
    shifted positive, so finite differences never straddle a LReLU/clamp
    corner. Kink-branch derivatives are exercised by the op-level gradient
    tests; this state is for checking gradients of the full composition.
    """
    params = init_params(ModelConfig(), seed=seed, precision=precision)
    for sub in params.subnets:
        for name, t in sub.named():
            if name.startswith("w"):
                w = np.abs(t.data)
                t.data[:] = w * (gain / w.sum(axis=(1, 2, 3), keepdims=True))
        sub.b0.data[:] = b0
        for b in (sub.b1, sub.b2, sub.b3, sub.b4):
            b.data[:] = bias
    return params


def make_corpus_dir(root, count=3, size=96, seed=0, rain=None):
    """Write a small clean/rainy PNG corpus under ``root``; returns the root."""
    rain = rain or RainParams(seed=seed)
    clean_dir = root / "clean"
    rainy_dir = root / "rainy"
    clean_dir.mkdir(parents=True, exist_ok=True)
    rainy_dir.mkdir(parents=True, exist_ok=True)
    for i in range(count):
        clean = random_scene(size, size, seed=seed * 1000 + i)
        rainy = synthesize_rain(clean, RainParams(seed=seed * 1000 + i))
        save_image(clean, clean_dir / f"img_{i:02d}.png")
        save_image(rainy, rainy_dir / f"img_{i:02d}.png")
    return root


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def rand_tensor(rng, *shape, lo=-1.0, hi=1.0, dtype=np.float64):
    return Tensor(rng.uniform(lo, hi, size=shape), dtype=dtype)
