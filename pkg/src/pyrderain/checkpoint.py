"""Binary checkpoint files for model parameters and optimizer state.

Layout (all integers little-endian uint32, values little-endian float32):

    magic "LPN1" | version | tensor_count |
    per tensor: name_len | name (UTF-8) | rank | dims[rank] | values

Tensors are namespaced: ``config/*`` stores the architecture, ``param/*`` the
trainable tensors (bit-exact round trip), and optional ``adam/*`` entries the
optimizer moments and step counter.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .autodiff import Tensor, resolve_precision
from .errors import CheckpointError
from .model import ModelConfig, ModelParams, SubnetParams, _layer_shapes
from .optim import AdamState

MAGIC = b"LPN1"
VERSION = 1

_U32 = struct.Struct("<I")


def _write_tensor(fh, name: str, values: np.ndarray) -> None:
    encoded = name.encode("utf-8")
    fh.write(_U32.pack(len(encoded)))
    fh.write(encoded)
    fh.write(_U32.pack(values.ndim))
    for dim in values.shape:
        fh.write(_U32.pack(dim))
    fh.write(np.ascontiguousarray(values, dtype="<f4").tobytes())


def _read_exact(fh, count: int, path) -> bytes:
    buf = fh.read(count)
    if len(buf) != count:
        raise CheckpointError(f"{path}: truncated checkpoint")
    return buf


def _read_u32(fh, path) -> int:
    return _U32.unpack(_read_exact(fh, 4, path))[0]


def _read_tensor(fh, path) -> tuple[str, np.ndarray]:
    name_len = _read_u32(fh, path)
    name = _read_exact(fh, name_len, path).decode("utf-8")
    rank = _read_u32(fh, path)
    dims = tuple(_read_u32(fh, path) for _ in range(rank))
    count = int(np.prod(dims)) if dims else 1
    raw = _read_exact(fh, 4 * count, path)
    return name, np.frombuffer(raw, dtype="<f4").reshape(dims).copy()


def save_checkpoint(path, params: ModelParams, state: AdamState | None = None) -> None:
    """Write parameters (and optionally Adam state) as float32, little-endian."""
    cfg = params.config
    entries: list[tuple[str, np.ndarray]] = [
        (
            "config/arch",
            np.array(
                [cfg.levels, cfg.recursions, cfg.feature_kernel, cfg.output_kernel, cfg.lrelu_slope],
                dtype=np.float32,
            ),
        ),
        ("config/kernel_counts", np.array(cfg.kernel_counts, dtype=np.float32)),
    ]
    entries.extend((f"param/{name}", t.data) for name, t in params.named_tensors())
    if state is not None:
        entries.append(("adam/step", np.array([state.t], dtype=np.float32)))
        entries.extend((f"adam/m/{name}", arr) for name, arr in state.m.items())
        entries.extend((f"adam/v/{name}", arr) for name, arr in state.v.items())
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_U32.pack(VERSION))
        fh.write(_U32.pack(len(entries)))
        for name, values in entries:
            _write_tensor(fh, name, values)


def load_checkpoint(path, precision: str = "f32") -> tuple[ModelParams, AdamState | None]:
    """Read a checkpoint; validates magic, version, and completeness before returning."""
    path = Path(path)
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise CheckpointError(f"{path}: {exc}") from exc
    with fh:
        magic = _read_exact(fh, 4, path)
        if magic != MAGIC:
            raise CheckpointError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        version = _read_u32(fh, path)
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported format version {version}")
        count = _read_u32(fh, path)
        tensors: dict[str, np.ndarray] = {}
        for _ in range(count):
            name, values = _read_tensor(fh, path)
            tensors[name] = values
        if fh.read(1):
            raise CheckpointError(f"{path}: trailing bytes after {count} tensors")
    return _assemble(path, tensors, precision)


def _assemble(path, tensors, precision) -> tuple[ModelParams, AdamState | None]:
    dtype = resolve_precision(precision)
    try:
        arch = tensors["config/arch"]
        counts = tensors["config/kernel_counts"]
    except KeyError as exc:
        raise CheckpointError(f"{path}: missing {exc.args[0]} tensor") from exc
    if arch.shape != (5,):
        raise CheckpointError(f"{path}: malformed config/arch shape {arch.shape}")
    # the slope travels as float32; recover the shortest decimal that round-trips
    slope = float(np.format_float_positional(np.float32(arch[4]), unique=True))
    config = ModelConfig(
        levels=int(arch[0]),
        recursions=int(arch[1]),
        kernel_counts=tuple(int(k) for k in counts),
        feature_kernel=int(arch[2]),
        output_kernel=int(arch[3]),
        lrelu_slope=slope,
    )
    subnets = []
    for level, k in enumerate(config.kernel_counts, start=1):
        fields = {}
        for name, shape in _layer_shapes(config, k):
            key = f"param/level{level}/{name}"
            if key not in tensors:
                raise CheckpointError(f"{path}: missing {key} tensor")
            values = tensors[key]
            if values.shape != shape:
                raise CheckpointError(f"{path}: {key} has shape {values.shape}, expected {shape}")
            fields[name] = Tensor(values.astype(dtype, copy=False))
        subnets.append(SubnetParams(**fields))
    params = ModelParams(config, subnets)
    if "adam/step" not in tensors:
        return params, None
    state = AdamState(t=int(tensors["adam/step"][0]))
    for name, t in params.named_tensors():
        for moment, store in (("m", state.m), ("v", state.v)):
            key = f"adam/{moment}/{name}"
            if key not in tensors:
                raise CheckpointError(f"{path}: missing {key} tensor")
            store[name] = tensors[key].astype(dtype, copy=False).reshape(t.shape)
    return params, state


def count_checkpoint_parameters(path) -> int:
    """Number of scalars across the ``param/`` tensors of a checkpoint file."""
    params, _ = load_checkpoint(path)
    return sum(t.size for t in params.tensors())
