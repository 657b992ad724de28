"""Adam optimizer with bias-corrected moment estimates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError
from .model import ModelParams


@dataclass
class AdamState:
    """Per-parameter first/second moment accumulators and the step counter."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0

    @classmethod
    def for_params(cls, params: ModelParams) -> "AdamState":
        m = {name: np.zeros(t.shape, dtype=t.dtype) for name, t in params.named_tensors()}
        v = {name: np.zeros(t.shape, dtype=t.dtype) for name, t in params.named_tensors()}
        return cls(m=m, v=v, t=0)


def adam_step(
    params: ModelParams,
    grads: dict[str, np.ndarray],
    state: AdamState,
    learning_rate: float = 0.001,
    beta1: float = 0.9,
    beta2: float = 0.999,
    epsilon: float = 1e-8,
) -> tuple[ModelParams, AdamState]:
    """One in-place Adam update; deterministic, updates run in parameter order."""
    state.t += 1
    t = state.t
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for name, tensor in params.named_tensors():
        g = grads.get(name)
        if g is None:
            raise ShapeError(f"adam_step: missing gradient for {name}")
        if g.shape != tensor.shape:
            raise ShapeError(
                f"adam_step: gradient shape {g.shape} != parameter shape {tensor.shape} for {name}"
            )
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * np.square(g)
        m_hat = m / bc1
        v_hat = v / bc2
        tensor.data -= (learning_rate * m_hat / (np.sqrt(v_hat) + epsilon)).astype(tensor.dtype)
    return params, state
