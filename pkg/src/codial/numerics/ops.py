"""Differentiable operators over :class:`Tensor`.

Images and feature maps are NHWC; convolution kernels are (kh, kw, C_in, C_out).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .tensor import DimensionError, Tensor, as_tensor, make_result


class LabelError(ValueError):
    """A class label lies outside ``[0, K)``."""


class DegenerateBatchError(ValueError):
    """Batch statistics are undefined for a single sample."""


def _pair(a, b) -> tuple[Tensor, Tensor]:
    # python scalars adopt the dtype of the tensor operand
    if isinstance(a, Tensor) and not isinstance(b, Tensor) and np.ndim(b) == 0:
        return a, Tensor(np.asarray(b, dtype=a.dtype))
    if isinstance(b, Tensor) and not isinstance(a, Tensor) and np.ndim(a) == 0:
        return Tensor(np.asarray(a, dtype=b.dtype)), b
    return as_tensor(a), as_tensor(b)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


# -- elementwise arithmetic -------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _pair(a, b)
    return make_result(
        a.data + b.data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape))
    )


def sub(a, b) -> Tensor:
    a, b = _pair(a, b)
    return make_result(
        a.data - b.data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape))
    )


def mul(a, b) -> Tensor:
    a, b = _pair(a, b)
    return make_result(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def div(a, b) -> Tensor:
    a, b = _pair(a, b)
    out = a.data / b.data
    return make_result(
        out,
        (a, b),
        lambda g: (_unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)),
    )


def neg(a) -> Tensor:
    a = as_tensor(a)
    return make_result(-a.data, (a,), lambda g: (-g,))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return make_result(out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    return make_result(np.log(a.data), (a,), lambda g: (g / a.data,))


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return make_result(np.maximum(a.data, 0), (a,), lambda g: (g * mask,))


def softplus(a) -> Tensor:
    """ln(1 + e^x), evaluated as max(x, 0) + ln(1 + e^-|x|)."""
    a = as_tensor(a)
    x = a.data
    out = np.maximum(x, 0) + np.log1p(np.exp(-np.abs(x)))
    # d/dx softplus = sigmoid(x), computed without overflow
    ex = np.exp(-np.abs(x))
    sig = np.where(x >= 0, 1.0 / (1.0 + ex), ex / (1.0 + ex)).astype(x.dtype)
    return make_result(out, (a,), lambda g: (g * sig,))


def clip(a, lo: float, hi: float) -> Tensor:
    """Clamp to ``[lo, hi]``; gradient passes only where the input was inside."""
    a = as_tensor(a)
    inside = (a.data >= lo) & (a.data <= hi)
    return make_result(np.clip(a.data, lo, hi), (a,), lambda g: (g * inside,))


# -- reductions and shape ---------------------------------------------------

def sum(a, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    out = np.sum(a.data, axis=axis, keepdims=keepdims)

    def bwd(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return make_result(np.asarray(out), (a,), bwd)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    n = a.data.size if axis is None else int(np.prod([a.shape[i] for i in np.atleast_1d(axis)]))
    return mul(sum(a, axis, keepdims), a.dtype.type(1.0 / n))


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return make_result(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]
    return make_result(
        np.concatenate([t.data for t in tensors], axis=axis),
        tensors,
        lambda g: tuple(np.split(g, cuts, axis=axis)),
    )


def take(a, indices, axis: int = 0) -> Tensor:
    """Gather slices along ``axis``; repeated indices accumulate in the gradient."""
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.intp)

    def bwd(g):
        out = np.zeros_like(a.data)
        np.add.at(out, (slice(None),) * (axis % a.ndim) + (idx,), g)
        return (out,)

    return make_result(np.take(a.data, idx, axis=axis), (a,), bwd)


# -- linear maps ------------------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shapes {a.shape} and {b.shape} do not align")
    return make_result(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def dense(x, weight, bias=None) -> Tensor:
    """``x @ weight + bias`` for x (B, D_in), weight (D_in, D_out)."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise DimensionError(f"dense input {x.shape} does not match weight {weight.shape}")
    y = matmul(x, weight)
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (weight.shape[1],):
            raise DimensionError(f"dense bias {bias.shape} does not match weight {weight.shape}")
        y = add(y, bias)
    return y


def conv2d(x, kernel, stride: int = 1, pad: int = 0) -> Tensor:
    """Cross-correlation of NHWC ``x`` with a (kh, kw, C_in, C_out) kernel."""
    x, kernel = as_tensor(x), as_tensor(kernel)
    if stride < 1 or pad < 0:
        raise ValueError(f"invalid stride={stride} / pad={pad}")
    if x.ndim != 4 or kernel.ndim != 4 or x.shape[3] != kernel.shape[2]:
        raise DimensionError(f"conv2d input {x.shape} incompatible with kernel {kernel.shape}")
    n, h, w, c = x.shape
    kh, kw, _, co = kernel.shape
    hp, wp = h + 2 * pad, w + 2 * pad
    if kh > hp or kw > wp:
        raise DimensionError(f"conv2d kernel {kernel.shape} larger than padded input {x.shape}")
    xp = np.pad(x.data, ((0, 0), (pad, pad), (pad, pad), (0, 0))) if pad else x.data
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    cols = kernels.im2col(xp, kh, kw, stride)
    kmat = kernel.data.reshape(kh * kw * c, co)
    out = (cols @ kmat).reshape(n, ho, wo, co)

    def bwd(g):
        g2 = g.reshape(n * ho * wo, co)
        gk = (cols.T @ g2).reshape(kernel.shape) if kernel.requires_grad else None
        gx = None
        if x.requires_grad:
            gxp = kernels.col2im(g2 @ kmat.T, (n, hp, wp, c), kh, kw, stride)
            gx = gxp[:, pad : pad + h, pad : pad + w] if pad else gxp
        return gx, gk

    return make_result(out, (x, kernel), bwd)


def max_pool2d(x, size: int = 2, stride: int | None = None) -> Tensor:
    x = as_tensor(x)
    stride = stride or size
    n, h, w, c = x.shape
    ho = (h - size) // stride + 1
    wo = (w - size) // stride + 1
    cols = kernels.im2col(x.data, size, size, stride).reshape(n * ho * wo, size * size, c)
    arg = cols.argmax(axis=1)
    out = np.take_along_axis(cols, arg[:, None, :], axis=1).reshape(n, ho, wo, c)

    def bwd(g):
        gcols = np.zeros_like(cols)
        np.put_along_axis(gcols, arg[:, None, :], g.reshape(n * ho * wo, 1, c), axis=1)
        return (kernels.col2im(gcols.reshape(n * ho * wo, size * size * c), (n, h, w, c), size, size, stride),)

    return make_result(out, (x,), bwd)


# -- normalization ----------------------------------------------------------

@dataclass
class RunningStats:
    mean: np.ndarray
    var: np.ndarray
    momentum: float = 0.1

    @classmethod
    def fresh(cls, channels: int, dtype=np.float32) -> "RunningStats":
        return cls(np.zeros(channels, dtype), np.ones(channels, dtype))


BN_EPS = 1e-5


def batch_norm(x, gamma, beta_shift, running: RunningStats, training: bool = True) -> Tensor:
    """Per-channel normalization over every axis but the last."""
    x, gamma, beta_shift = as_tensor(x), as_tensor(gamma), as_tensor(beta_shift)
    c = x.shape[-1]
    if gamma.shape != (c,) or beta_shift.shape != (c,):
        raise DimensionError(f"batch_norm channels {c} vs gamma {gamma.shape}, shift {beta_shift.shape}")
    axes = tuple(range(x.ndim - 1))
    m = int(np.prod([x.shape[i] for i in axes]))
    if not training:
        inv = 1.0 / np.sqrt(running.var + BN_EPS)
        xhat = (x.data - running.mean) * inv
        out = (xhat * gamma.data + beta_shift.data).astype(x.dtype)
        return make_result(
            out,
            (x, gamma, beta_shift),
            lambda g: (g * (gamma.data * inv), (g * xhat).sum(axis=axes), g.sum(axis=axes)),
        )
    if x.shape[0] < 2:
        raise DegenerateBatchError(f"batch_norm in train mode needs batch size >= 2, got {x.shape[0]}")
    mu = x.data.mean(axis=axes)
    var = x.data.var(axis=axes)
    inv = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (x.data - mu) * inv
    out = xhat * gamma.data + beta_shift.data
    mom = running.momentum
    running.mean[...] = (1 - mom) * running.mean + mom * mu
    running.var[...] = (1 - mom) * running.var + mom * var * (m / max(m - 1, 1))

    def bwd(g):
        gg = (g * xhat).sum(axis=axes)
        gb = g.sum(axis=axes)
        gx = (gamma.data * inv / m) * (m * g - gb - xhat * gg)
        return gx, gg, gb

    return make_result(out, (x, gamma, beta_shift), bwd)


# -- losses -----------------------------------------------------------------

def log_softmax(logits) -> Tensor:
    logits = as_tensor(logits)
    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    out = z - lse
    soft = np.exp(out)
    return make_result(out, (logits,), lambda g: (g - soft * g.sum(axis=-1, keepdims=True),))


def softmax_cross_entropy(logits, labels) -> Tensor:
    """Batch-mean of ``-log softmax(logits)[label]``."""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.intp)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise DimensionError(f"logits {logits.shape} vs labels {labels.shape}")
    k = logits.shape[1]
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise LabelError(f"labels must lie in [0, {k}), got range [{labels.min()}, {labels.max()}]")
    b = logits.shape[0]
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    picked = z[np.arange(b), labels]
    loss = np.asarray((lse - picked).mean(), dtype=logits.dtype)

    def bwd(g):
        p = np.exp(z - lse[:, None])
        p[np.arange(b), labels] -= 1.0
        return (p * (g / b),)

    return make_result(loss, (logits,), bwd)


@dataclass
class GaussianRepr:
    """Diagonal Gaussian given by mean and log-variance rows."""

    mean: Tensor
    logvar: Tensor
    extra: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.mean.shape != self.logvar.shape:
            raise DimensionError(f"mean {self.mean.shape} vs logvar {self.logvar.shape}")

    @property
    def dim(self) -> int:
        return self.mean.shape[-1]


def reparam_sample(repr_: GaussianRepr, rng: np.random.Generator, noise: np.ndarray | None = None) -> Tensor:
    """mean + exp(logvar / 2) * eps with eps ~ N(0, 1) from ``rng`` (or a frozen ``noise``)."""
    if noise is None:
        noise = rng.standard_normal(repr_.mean.shape)
    eps = Tensor(np.asarray(noise, dtype=repr_.mean.dtype))
    return add(repr_.mean, mul(exp(mul(repr_.logvar, repr_.mean.dtype.type(0.5))), eps))
