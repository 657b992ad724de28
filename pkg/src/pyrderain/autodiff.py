"""Dense 4-D tensors, differentiable primitives, and a reverse-mode tape.

Values are numpy arrays in NCHW layout, float32 by default with a float64
mode used for gradient checking. Operations run eagerly; while a ``Tape`` is
active each primitive appends a record, and replaying the records in exact
reverse order accumulates gradients deterministically.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import NumericError, ShapeError

PRECISIONS = {"f32": np.float32, "f64": np.float64}
AXIS_NAMES = ("batch", "channels", "height", "width")


def resolve_precision(precision: str) -> np.dtype:
    """Map a precision name ('f32' or 'f64') to a numpy dtype."""
    try:
        return np.dtype(PRECISIONS[precision])
    except KeyError:
        raise ValueError(f"unknown precision {precision!r}, expected one of {sorted(PRECISIONS)}")


class Tensor:
    """A dense numeric value: a 4-D (batch, channels, height, width) array or a 0-d scalar.

    Tensors are immutable by convention once produced by an operation; the
    only sanctioned in-place mutation is the optimizer updating parameter
    ``data`` between training steps.
    """

    __slots__ = ("data",)

    def __init__(self, data, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        if arr.ndim not in (0, 4):
            raise ShapeError(f"tensor must be 4-D (NCHW) or a 0-d scalar, got shape {arr.shape}")
        if arr.ndim == 4 and min(arr.shape) < 1:
            axis = AXIS_NAMES[arr.shape.index(min(arr.shape))]
            raise ShapeError(f"tensor axis {axis} must be >= 1, got shape {arr.shape}")
        self.data = arr

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"

    # Arithmetic sugar; scalars are non-differentiable constants.
    def __add__(self, other):
        return add(self, other) if isinstance(other, Tensor) else offset(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other) if isinstance(other, Tensor) else offset(self, -other)

    def __rsub__(self, other):
        return offset(neg(self), other)

    def __mul__(self, other):
        return mul(self, other) if isinstance(other, Tensor) else scale(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other) if isinstance(other, Tensor) else scale(self, 1.0 / other)

    def __neg__(self):
        return neg(self)


class Tape:
    """Ordered record of primitive operations for reverse-mode differentiation.

    Use as a context manager around the forward computation, then call
    :meth:`gradients` on a scalar output. Records are replayed in exact
    reverse order of recording and gradient accumulation is additive in that
    fixed order, so results are deterministic run to run. A tape must only be
    used from one logical execution context at a time.
    """

    __slots__ = ("_records",)

    def __init__(self):
        self._records: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _TAPE_STACK.pop()
        assert popped is self, "tape context exited out of order"
        return False

    def __len__(self) -> int:
        return len(self._records)

    def gradients(self, output: Tensor, wrt: Sequence[Tensor]) -> dict[Tensor, np.ndarray]:
        """Gradients of a scalar ``output`` with respect to each tensor in ``wrt``.

        Returns a map keyed by tensor identity. Tensors that do not reach the
        output get zero gradients.
        """
        if output.data.ndim != 0:
            raise ValueError(f"gradients require a scalar output, got shape {output.shape}")
        grads: dict[Tensor, np.ndarray] = {output: np.ones((), dtype=output.dtype)}
        for out, inputs, backward in reversed(self._records):
            g = grads.pop(out, None)
            if g is None:
                continue
            for node, gi in zip(inputs, backward(g)):
                if gi is None:
                    continue
                cur = grads.get(node)
                grads[node] = gi if cur is None else cur + gi
        return {t: grads.get(t, np.zeros(t.shape, dtype=t.dtype)) for t in wrt}


_TAPE_STACK: list[Tape] = []


def _record(out: Tensor, inputs: tuple, backward: Callable) -> None:
    if _TAPE_STACK:
        _TAPE_STACK[-1]._records.append((out, inputs, backward))


def _check_pair(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        if a.data.ndim == b.data.ndim == 4:
            for axis, (da, db) in enumerate(zip(a.shape, b.shape)):
                if da != db:
                    raise ShapeError(f"{op}: {AXIS_NAMES[axis]} mismatch ({da} != {db})")
        raise ShapeError(f"{op}: shape mismatch ({a.shape} != {b.shape})")
    if a.dtype != b.dtype:
        raise ValueError(f"{op}: precision mismatch ({a.dtype} != {b.dtype})")


# ---------------------------------------------------------------------------
# Elementwise primitives


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_pair(a, b, "add")
    out = Tensor(a.data + b.data)
    _record(out, (a, b), lambda g: (g, g))
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_pair(a, b, "sub")
    out = Tensor(a.data - b.data)
    _record(out, (a, b), lambda g: (g, -g))
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_pair(a, b, "mul")
    out = Tensor(a.data * b.data)
    ad, bd = a.data, b.data
    _record(out, (a, b), lambda g: (g * bd, g * ad))
    return out


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_pair(a, b, "div")
    out = Tensor(a.data / b.data)
    bd, od = b.data, out.data
    _record(out, (a, b), lambda g: (g / bd, -g * od / bd))
    return out


def neg(a: Tensor) -> Tensor:
    out = Tensor(-a.data)
    _record(out, (a,), lambda g: (-g,))
    return out


def scale(a: Tensor, factor: float) -> Tensor:
    """Multiply by a non-differentiable scalar constant."""
    c = a.dtype.type(factor)
    out = Tensor(a.data * c)
    _record(out, (a,), lambda g: (g * c,))
    return out


def offset(a: Tensor, shift: float) -> Tensor:
    """Add a non-differentiable scalar constant."""
    out = Tensor(a.data + a.dtype.type(shift))
    _record(out, (a,), lambda g: (g,))
    return out


def abs_(a: Tensor) -> Tensor:
    """Elementwise absolute value; the subgradient at 0 is 0."""
    out = Tensor(np.abs(a.data))
    ad = a.data
    _record(out, (a,), lambda g: (g * np.sign(ad),))
    return out


def mean(a: Tensor) -> Tensor:
    out = Tensor(np.asarray(a.data.mean()))
    shape, n = a.shape, a.size
    _record(out, (a,), lambda g: (np.full(shape, g / n, dtype=g.dtype),))
    return out


def sum_(a: Tensor) -> Tensor:
    out = Tensor(np.asarray(a.data.sum()))
    shape = a.shape
    _record(out, (a,), lambda g: (np.full(shape, g, dtype=g.dtype),))
    return out


def leaky_relu(a: Tensor, slope: float) -> Tensor:
    """x for x >= 0, slope * x otherwise. ``slope`` must be in [0, 1)."""
    if not 0.0 <= slope < 1.0:
        raise ValueError(f"leaky_relu slope must be in [0, 1), got {slope}")
    c = a.dtype.type(slope)
    ad = a.data
    out = Tensor(np.where(ad >= 0, ad, ad * c))
    _record(out, (a,), lambda g: (np.where(ad >= 0, g, g * c),))
    return out


def relu_clamp(a: Tensor) -> Tensor:
    """max(0, x). The gradient passes where x >= 0 and is blocked where x < 0."""
    ad = a.data
    out = Tensor(np.maximum(ad, 0))
    _record(out, (a,), lambda g: (np.where(ad >= 0, g, g.dtype.type(0)),))
    return out


# ---------------------------------------------------------------------------
# Convolution


class ConvSpec:
    """Shape contract for a stride-1 'same' 2-D convolution.

    Kernel sides must be odd so output spatial dims equal input spatial dims.
    Padding is ``zero_same`` (network convolutions) or ``symmetric_same``
    (reflect padding, used by filtering that must be exact at borders).
    """

    PADDINGS = ("zero_same", "symmetric_same")

    __slots__ = ("kernel_h", "kernel_w", "in_channels", "out_channels", "padding")

    def __init__(self, kernel_h, kernel_w, in_channels, out_channels, padding="zero_same"):
        if kernel_h % 2 == 0 or kernel_w % 2 == 0:
            raise ShapeError(f"kernel sides must be odd, got {kernel_h}x{kernel_w}")
        if padding not in self.PADDINGS:
            raise ValueError(f"unknown padding {padding!r}, expected one of {self.PADDINGS}")
        self.kernel_h = kernel_h
        self.kernel_w = kernel_w
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.padding = padding

    @classmethod
    def from_weights(cls, weights: Tensor, padding: str) -> "ConvSpec":
        o, c, kh, kw = weights.shape
        return cls(kh, kw, c, o, padding)

    def check(self, x: Tensor, weights: Tensor, bias: Tensor) -> None:
        if x.data.ndim != 4:
            raise ShapeError(f"conv2d input must be 4-D, got shape {x.shape}")
        if x.shape[1] != self.in_channels:
            raise ShapeError(
                f"conv2d: channels mismatch (input has {x.shape[1]}, kernel expects {self.in_channels})"
            )
        if weights.shape != (self.out_channels, self.in_channels, self.kernel_h, self.kernel_w):
            raise ShapeError(f"conv2d: weight shape {weights.shape} does not match spec")
        if bias.shape != (1, self.out_channels, 1, 1):
            raise ShapeError(
                f"conv2d: bias shape {bias.shape} != (1, {self.out_channels}, 1, 1)"
            )
        if x.dtype != weights.dtype or x.dtype != bias.dtype:
            raise ValueError("conv2d: input, weights, and bias must share one precision")


def _pad2d(a: np.ndarray, ph: int, pw: int, padding: str) -> np.ndarray:
    if ph == 0 and pw == 0:
        return a
    width = ((0, 0), (0, 0), (ph, ph), (pw, pw))
    if padding == "zero_same":
        return np.pad(a, width)
    return np.pad(a, width, mode="reflect")


def _corr_valid(xp: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Valid cross-correlation of a padded NCHW array with an OIHW kernel.

    Accumulates one channel-contraction GEMM per kernel tap; the reduction
    order per output element is fixed, preserving bit-determinism.
    """
    o, c, kh, kw = w.shape
    h = xp.shape[2] - kh + 1
    wd = xp.shape[3] - kw + 1
    acc = None
    for i in range(kh):
        for j in range(kw):
            xs = xp[:, :, i : i + h, j : j + wd]
            t = np.tensordot(w[:, :, i, j], xs, axes=(1, 1))  # (o, b, h, w)
            acc = t if acc is None else np.add(acc, t, out=acc)
    return np.ascontiguousarray(acc.transpose(1, 0, 2, 3))


def _corr_weights(xp: np.ndarray, g: np.ndarray, kh: int, kw: int) -> np.ndarray:
    h, wd = g.shape[2], g.shape[3]
    o, c = g.shape[1], xp.shape[1]
    gw = np.empty((o, c, kh, kw), dtype=g.dtype)
    for i in range(kh):
        for j in range(kw):
            xs = xp[:, :, i : i + h, j : j + wd]
            gw[:, :, i, j] = np.tensordot(g, xs, axes=([0, 2, 3], [0, 2, 3]))
    return gw


def conv2d(x: Tensor, weights: Tensor, bias: Tensor, padding: str = "zero_same") -> Tensor:
    """Stride-1 'same' 2-D convolution (cross-correlation convention, no kernel flip).

    ``weights`` has shape (out_channels, in_channels, kh, kw) and ``bias``
    shape (1, out_channels, 1, 1); the bias is added per output channel.
    """
    spec = ConvSpec.from_weights(weights, padding)
    spec.check(x, weights, bias)
    kh, kw = spec.kernel_h, spec.kernel_w
    ph, pw = kh // 2, kw // 2
    xp = _pad2d(x.data, ph, pw, padding)
    out = Tensor(_corr_valid(xp, weights.data) + bias.data)
    wd = weights.data
    in_shape = x.shape

    def backward(g):
        gb = g.sum(axis=(0, 2, 3), keepdims=True)
        gw = _corr_weights(xp, g, kh, kw)
        if kh == kw == 1:
            gx = np.ascontiguousarray(
                np.tensordot(wd[:, :, 0, 0], g, axes=(0, 1)).transpose(1, 0, 2, 3)
            )
        else:
            w_adj = np.ascontiguousarray(wd[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
            gp = np.pad(g, ((0, 0), (0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1)))
            gxp = _corr_valid(gp, w_adj)
            if padding == "zero_same":
                gx = gxp[:, :, ph : ph + in_shape[2], pw : pw + in_shape[3]]
            else:
                gx = _fold_axis(gxp, ph, 2, in_shape[2])
                gx = _fold_axis(gx, pw, 3, in_shape[3])
        return gx, gw, gb

    _record(out, (x, weights, bias), backward)
    return out


# ---------------------------------------------------------------------------
# Padding, separable filtering, and resampling primitives


def _reflect_index(idx: np.ndarray, n: int) -> np.ndarray:
    """Mirror out-of-range indices without repeating the edge sample."""
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * n - 2
    m = np.mod(idx, period)
    return np.where(m < n, m, period - m)


def _axis_slicer(ndim: int, axis: int, sl: slice) -> tuple:
    return tuple(sl if k == axis else slice(None) for k in range(ndim))


def _fold_axis(gp: np.ndarray, p: int, axis: int, n: int) -> np.ndarray:
    """Adjoint of symmetric padding: fold padded-region gradients onto sources."""
    if p == 0:
        return gp
    if p < n:
        core = gp[_axis_slicer(gp.ndim, axis, slice(p, p + n))].copy()
        left = gp[_axis_slicer(gp.ndim, axis, slice(0, p))]
        right = gp[_axis_slicer(gp.ndim, axis, slice(p + n, None))]
        core[_axis_slicer(gp.ndim, axis, slice(1, p + 1))] += np.flip(left, axis)
        core[_axis_slicer(gp.ndim, axis, slice(n - p - 1, n - 1))] += np.flip(right, axis)
        return core
    # Deep padding of a tiny axis: scatter-add through the full index map.
    idx = _reflect_index(np.arange(-p, n + p), n)
    gm = np.moveaxis(gp, axis, 0)
    out = np.zeros((n,) + gm.shape[1:], dtype=gp.dtype)
    np.add.at(out, idx, gm)
    return np.moveaxis(out, 0, axis)


def reflect_pad_axis(x: Tensor, p: int, axis: int) -> Tensor:
    """Symmetric (reflect, edge-unrepeated) padding of one spatial axis."""
    if axis not in (2, 3):
        raise ValueError(f"padding axis must be 2 or 3, got {axis}")
    if p < 0:
        raise ValueError("padding must be non-negative")
    width = [(0, 0)] * 4
    width[axis] = (p, p)
    out = Tensor(np.pad(x.data, width, mode="reflect"))
    n = x.shape[axis]
    _record(out, (x,), lambda g: (_fold_axis(g, p, axis, n),))
    return out


def avg2_axis(x: Tensor, axis: int) -> Tensor:
    """Valid two-tap average along one spatial axis: y_i = (x_i + x_{i+1}) / 2.

    Exact on constant inputs, which makes cascades of this op preserve
    constants bit-exactly.
    """
    if axis not in (2, 3):
        raise ValueError(f"filter axis must be 2 or 3, got {axis}")
    n = x.shape[axis]
    if n < 2:
        raise ShapeError(f"avg2_axis needs axis length >= 2, got {n}")
    nd = x.data.ndim
    lo = x.data[_axis_slicer(nd, axis, slice(0, n - 1))]
    hi = x.data[_axis_slicer(nd, axis, slice(1, n))]
    half = x.dtype.type(0.5)
    out = Tensor((lo + hi) * half)

    def backward(g):
        gh = g * half
        gx = np.zeros(x.shape, dtype=g.dtype)
        gx[_axis_slicer(nd, axis, slice(0, n - 1))] += gh
        gx[_axis_slicer(nd, axis, slice(1, n))] += gh
        return (gx,)

    _record(out, (x,), backward)
    return out


def filter_axis(x: Tensor, taps: np.ndarray, axis: int) -> Tensor:
    """Correlate one spatial axis with a fixed odd-length tap vector.

    Uses symmetric padding so the output length equals the input length. The
    taps are constants, not differentiable inputs.
    """
    if axis not in (2, 3):
        raise ValueError(f"filter axis must be 2 or 3, got {axis}")
    taps = np.asarray(taps, dtype=x.dtype)
    k = taps.shape[0]
    if taps.ndim != 1 or k % 2 == 0:
        raise ShapeError(f"taps must be a 1-D odd-length vector, got shape {taps.shape}")
    p = k // 2
    n = x.shape[axis]
    width = [(0, 0)] * 4
    width[axis] = (p, p)
    xp = np.pad(x.data, width, mode="reflect")
    win = sliding_window_view(xp, k, axis=axis)
    out = Tensor(np.tensordot(win, taps, axes=([-1], [0])))
    flipped = taps[::-1].copy()

    def backward(g):
        zw = [(0, 0)] * 4
        zw[axis] = (k - 1, k - 1)
        gz = np.pad(g, zw)
        gwin = sliding_window_view(gz, k, axis=axis)
        gxp = np.tensordot(gwin, flipped, axes=([-1], [0]))
        return (_fold_axis(gxp, p, axis, n),)

    _record(out, (x,), backward)
    return out


def decimate2(x: Tensor) -> Tensor:
    """Keep even-indexed rows and columns; output dims are ceil(h/2), ceil(w/2)."""
    out = Tensor(np.ascontiguousarray(x.data[:, :, ::2, ::2]))
    shape = x.shape

    def backward(g):
        gx = np.zeros(shape, dtype=g.dtype)
        gx[:, :, ::2, ::2] = g
        return (gx,)

    _record(out, (x,), backward)
    return out


def zero_upsample(x: Tensor, target_h: int, target_w: int) -> Tensor:
    """Place source pixel (i, j) at (2i, 2j) in a zero array of the target size.

    Each target dim must be 2*d-1 or 2*d for the corresponding source dim d.
    """
    b, c, h, w = x.shape
    for name, d, t in (("height", h, target_h), ("width", w, target_w)):
        if t not in (2 * d - 1, 2 * d):
            raise ShapeError(
                f"zero_upsample: target {name} {t} not in {{2*{d}-1, 2*{d}}} for source {name} {d}"
            )
    z = np.zeros((b, c, target_h, target_w), dtype=x.dtype)
    z[:, :, ::2, ::2] = x.data
    out = Tensor(z)
    _record(out, (x,), lambda g: (np.ascontiguousarray(g[:, :, ::2, ::2]),))
    return out


# ---------------------------------------------------------------------------
# Gradient checking


def finite_difference_check(
    f: Callable[[], Tensor],
    params: Iterable[tuple[str, Tensor]],
    eps: float = 1e-5,
) -> float:
    """Worst relative error between tape gradients of ``f()`` and central differences.

    ``f`` must evaluate to a scalar using the given parameters. Requires the
    64-bit precision mode so the comparison is not noise-limited. The relative
    error denominator is max(|analytic|, |numeric|, 1e-8).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    named = list(params)
    for name, t in named:
        if t.dtype != np.float64:
            raise ValueError(f"finite_difference_check requires float64 parameters ({name} is {t.dtype})")
    with Tape() as tape:
        out = f()
    grad_map = tape.gradients(out, [t for _, t in named])
    worst = 0.0
    for name, t in named:
        analytic = grad_map[t].reshape(-1)
        flat = t.data.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            fp = float(f().data)
            flat[k] = orig - eps
            fm = float(f().data)
            flat[k] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise NumericError(f"non-finite objective while perturbing {name}[{k}]")
            numeric = (fp - fm) / (2.0 * eps)
            rel = abs(analytic[k] - numeric) / max(abs(analytic[k]), abs(numeric), 1e-8)
            worst = max(worst, rel)
    return worst
