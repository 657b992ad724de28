"""The pyramid derainer: one recursive-residual sub-network per pyramid level.

Each sub-network extracts features from its Laplacian level, refines them
through T recursive blocks that share one set of weights, and predicts a
residual added back onto the level (no batch normalization anywhere). The
refined Laplacian pyramid is collapsed into a clamped Gaussian pyramid whose
finest level is the restored image.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, add, conv2d, leaky_relu, resolve_precision
from .errors import ShapeError
from .pyramid import gaussian_reconstruct, laplacian_decompose


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters.

    ``kernel_counts`` holds the per-level feature counts, finest to coarsest;
    the coarsest level usually gets a single kernel since it only needs a
    gentle global adjustment. ``feature_kernel``/``output_kernel`` are the
    spatial sizes of the first and last convolutions (the three inner
    convolutions are fixed at 3x3, 1x1, 3x3).
    """

    levels: int = 5
    recursions: int = 5
    kernel_counts: tuple[int, ...] = (16, 8, 4, 2, 1)
    feature_kernel: int = 3
    output_kernel: int = 1
    lrelu_slope: float = 0.2

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError(f"levels must be >= 1, got {self.levels}")
        if self.recursions < 1:
            raise ValueError(f"recursions must be >= 1, got {self.recursions}")
        if len(self.kernel_counts) != self.levels:
            raise ValueError(
                f"kernel_counts has {len(self.kernel_counts)} entries for {self.levels} levels"
            )
        if any(k < 1 for k in self.kernel_counts):
            raise ValueError("kernel counts must be >= 1")
        for name in ("feature_kernel", "output_kernel"):
            if getattr(self, name) % 2 == 0 or getattr(self, name) < 1:
                raise ValueError(f"{name} must be odd and >= 1")
        if not 0.0 <= self.lrelu_slope < 1.0:
            raise ValueError("lrelu_slope must be in [0, 1)")

    @property
    def min_side(self) -> int:
        """Smallest input side that keeps every level of the chain meaningful."""
        return 2 ** (self.levels - 1)


@dataclass
class SubnetParams:
    """One level's convolution weights and biases.

    w1/w2/w3 (and their biases) are shared across all recursive blocks. The
    bias layout (1, K, 1, 1) broadcasts over batch and space.
    """

    w0: Tensor
    b0: Tensor
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor
    w3: Tensor
    b3: Tensor
    w4: Tensor
    b4: Tensor

    FIELDS = ("w0", "b0", "w1", "b1", "w2", "b2", "w3", "b3", "w4", "b4")

    def named(self):
        for name in self.FIELDS:
            yield name, getattr(self, name)


@dataclass
class ModelParams:
    """All trainable tensors plus the architecture they belong to."""

    config: ModelConfig
    subnets: list[SubnetParams] = field(default_factory=list)

    def named_tensors(self) -> list[tuple[str, Tensor]]:
        out = []
        for level, sub in enumerate(self.subnets, start=1):
            for name, t in sub.named():
                out.append((f"level{level}/{name}", t))
        return out

    def tensors(self) -> list[Tensor]:
        return [t for _, t in self.named_tensors()]

    @property
    def dtype(self):
        return self.subnets[0].w0.dtype

    def astype(self, precision: str) -> "ModelParams":
        dtype = resolve_precision(precision)
        subnets = [
            SubnetParams(**{name: Tensor(t.data, dtype=dtype) for name, t in sub.named()})
            for sub in self.subnets
        ]
        return ModelParams(self.config, subnets)


def _layer_shapes(config: ModelConfig, k: int) -> list[tuple[str, tuple[int, ...]]]:
    k0, k4 = config.feature_kernel, config.output_kernel
    return [
        ("w0", (k, 3, k0, k0)),
        ("b0", (1, k, 1, 1)),
        ("w1", (k, k, 3, 3)),
        ("b1", (1, k, 1, 1)),
        ("w2", (k, k, 1, 1)),
        ("b2", (1, k, 1, 1)),
        ("w3", (k, k, 3, 3)),
        ("b3", (1, k, 1, 1)),
        ("w4", (3, k, k4, k4)),
        ("b4", (1, 3, 1, 1)),
    ]


def count_parameters(model: ModelConfig | ModelParams) -> int:
    """Exact number of scalar weights and biases."""
    if isinstance(model, ModelParams):
        return sum(t.size for t in model.tensors())
    total = 0
    for k in model.kernel_counts:
        total += sum(int(np.prod(shape)) for _, shape in _layer_shapes(model, k))
    return total


def init_params(config: ModelConfig = ModelConfig(), seed: int = 0, precision: str = "f32") -> ModelParams:
    """Fan-balanced uniform weights, zero biases; deterministic for a fixed seed.

    Each weight is drawn from U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
    """
    dtype = resolve_precision(precision)
    rng = np.random.default_rng(seed)
    subnets = []
    for k in config.kernel_counts:
        fields = {}
        for name, shape in _layer_shapes(config, k):
            if name.startswith("b"):
                fields[name] = Tensor(np.zeros(shape, dtype=dtype))
            else:
                out_ch, in_ch, kh, kw = shape
                a = np.sqrt(6.0 / (in_ch * kh * kw + out_ch * kh * kw))
                fields[name] = Tensor(rng.uniform(-a, a, size=shape).astype(dtype))
        subnets.append(SubnetParams(**fields))
    return ModelParams(config, subnets)


def subnet_forward(level_in: Tensor, p: SubnetParams, recursions: int, slope: float) -> Tensor:
    """Run one level's sub-network; output has 3 channels and the input's dims.

    h0 = LReLU(w0 * x + b0); each recursive block computes
    f1 = LReLU(w1 * h + b1), f2 = LReLU(w2 * f1 + b2), f3 = w3 * f2 + b3
    (no activation), then h = LReLU(f3 + h0). The reconstruction layer adds a
    skip connection: out = (w4 * h_T + b4) + x.
    """
    if level_in.data.ndim != 4 or level_in.shape[1] != 3:
        raise ShapeError(f"sub-network input must have 3 channels, got shape {level_in.shape}")
    h0 = leaky_relu(conv2d(level_in, p.w0, p.b0), slope)
    h = h0
    for _ in range(recursions):
        f1 = leaky_relu(conv2d(h, p.w1, p.b1), slope)
        f2 = leaky_relu(conv2d(f1, p.w2, p.b2), slope)
        f3 = conv2d(f2, p.w3, p.b3)
        h = leaky_relu(add(f3, h0), slope)
    return add(conv2d(h, p.w4, p.b4), level_in)


def net_forward(x: Tensor, params: ModelParams) -> tuple[list[Tensor], list[Tensor]]:
    """Derain a batch of images in [0, 1].

    Decomposes the input into its Laplacian pyramid, refines each level with
    its sub-network, and reconstructs a clamped Gaussian pyramid. Returns
    ``(gaussian_out, laplacian_out)``; the restored image is
    ``gaussian_out[0]``.
    """
    cfg = params.config
    if x.data.ndim != 4 or x.shape[1] != 3:
        raise ShapeError(f"expected a (batch, 3, h, w) input, got shape {x.shape}")
    if min(x.shape[2], x.shape[3]) < cfg.min_side:
        raise ShapeError(
            f"input {x.shape[2]}x{x.shape[3]} too small for a {cfg.levels}-level pyramid "
            f"(needs sides >= {cfg.min_side})"
        )
    lap, _ = laplacian_decompose(x, cfg.levels)
    lap_out = [
        subnet_forward(lap[n], params.subnets[n], cfg.recursions, cfg.lrelu_slope)
        for n in range(cfg.levels)
    ]
    return gaussian_reconstruct(lap_out, clamp=True), lap_out
