"""Dense NCHW kernels used by the network forward pass.

Tensors are plain ``numpy.float32`` arrays of rank 4 laid out as
(batch, channels, height, width).  Every kernel accumulates in float64 and
rounds to float32 on store, so results do not depend on BLAS precision modes.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np


class ShapeError(ValueError):
    """Raised when tensor shapes are incompatible with an operation."""


def as_tensor(x) -> np.ndarray:
    """Validate and return ``x`` as a contiguous rank-4 float32 array."""
    arr = np.ascontiguousarray(x, dtype=np.float32)
    if arr.ndim != 4:
        raise ShapeError(f"expected a rank-4 tensor, got shape {arr.shape}")
    if min(arr.shape) < 1:
        raise ShapeError(f"all dimensions must be >= 1, got {arr.shape}")
    return arr


def _out_size(size: int, k: int, stride: int, padding: int) -> int:
    n = (size + 2 * padding - k) // stride + 1
    if size + 2 * padding - k < 0 or n < 1:
        raise ShapeError(
            f"non-positive output size for input {size}, kernel {k}, "
            f"stride {stride}, padding {padding}"
        )
    return n


def conv2d(
    x: np.ndarray,
    weight: np.ndarray,
    bias: Optional[np.ndarray] = None,
    stride: int = 1,
    padding: int = 0,
) -> np.ndarray:
    """Direct 2-D convolution (cross-correlation) with zero padding.

    The sum runs over kernel taps; each tap contributes one channel
    contraction over the strided input window.  No im2col buffer is built.

    Args:
        x: input of shape (N, C, H, W).
        weight: kernel of shape (O, C, kH, kW).
        bias: optional vector of length O.
        stride: positive step between output samples.
        padding: zeros added on every spatial border.

    Returns:
        float32 tensor of shape (N, O, Ho, Wo).
    """
    x = as_tensor(x)
    weight = np.asarray(weight, dtype=np.float32)
    if weight.ndim != 4:
        raise ShapeError(f"weight must be rank 4, got {weight.shape}")
    if stride < 1 or padding < 0:
        raise ValueError("stride must be >= 1 and padding >= 0")
    n, c, h, w = x.shape
    o, wc, kh, kw = weight.shape
    if wc != c:
        raise ShapeError(f"input has {c} channels but weight expects {wc}")
    ho = _out_size(h, kh, stride, padding)
    wo = _out_size(w, kw, stride, padding)

    xp = x.astype(np.float64)
    if padding:
        xp = np.pad(xp, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    w64 = weight.astype(np.float64)
    acc = np.zeros((n, o, ho, wo), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            window = xp[:, :, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride]
            acc += np.einsum("oc,nchw->nohw", w64[:, :, i, j], window, optimize=True)
    if bias is not None:
        bias = np.asarray(bias, dtype=np.float32).reshape(-1)
        if bias.shape[0] != o:
            raise ShapeError(f"bias length {bias.shape[0]} != output channels {o}")
        acc += bias.astype(np.float64)[None, :, None, None]
    return acc.astype(np.float32)


def batch_norm(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    eps: float = 1e-3,
) -> np.ndarray:
    """Inference-mode batch normalization over the channel axis."""
    x = as_tensor(x)
    c = x.shape[1]
    vecs = [np.asarray(v, dtype=np.float64).reshape(-1) for v in (gamma, beta, running_mean, running_var)]
    for name, v in zip(("gamma", "beta", "running_mean", "running_var"), vecs):
        if v.shape[0] != c:
            raise ShapeError(f"{name} has length {v.shape[0]}, expected {c}")
    g, b, m, var = vecs
    if np.any(var < 0):
        raise ValueError("running_var must be non-negative")
    scale = g / np.sqrt(var + eps)
    out = (x.astype(np.float64) - m[None, :, None, None]) * scale[None, :, None, None] + b[None, :, None, None]
    return out.astype(np.float32)


def sigmoid(x) -> np.ndarray:
    x64 = np.asarray(x, dtype=np.float64)
    # split by sign so exp never overflows
    out = np.empty_like(x64)
    pos = x64 >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x64[pos]))
    e = np.exp(x64[~pos])
    out[~pos] = e / (1.0 + e)
    return out.astype(np.float32)


def silu(x) -> np.ndarray:
    """x * sigmoid(x), elementwise."""
    x64 = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x64)
    pos = x64 >= 0
    out[pos] = x64[pos] / (1.0 + np.exp(-x64[pos]))
    e = np.exp(x64[~pos])
    out[~pos] = x64[~pos] * e / (1.0 + e)
    return out.astype(np.float32)


def softmax(x, axis: int = -1) -> np.ndarray:
    """Max-shifted softmax along ``axis``."""
    x64 = np.asarray(x, dtype=np.float64)
    if not -x64.ndim <= axis < x64.ndim:
        raise ValueError(f"axis {axis} out of range for rank {x64.ndim}")
    e = np.exp(x64 - x64.max(axis=axis, keepdims=True))
    return (e / e.sum(axis=axis, keepdims=True)).astype(np.float32)


def max_pool2d(x: np.ndarray, k: int, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Max pooling with -inf padding."""
    x = as_tensor(x)
    n, c, h, w = x.shape
    ho = _out_size(h, k, stride, padding)
    wo = _out_size(w, k, stride, padding)
    xp = x
    if padding:
        xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)), constant_values=-np.inf)
    out = np.full((n, c, ho, wo), -np.inf, dtype=np.float32)
    for i in range(k):
        for j in range(k):
            np.maximum(
                out,
                xp[:, :, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride],
                out=out,
            )
    return out


def upsample_nearest(x: np.ndarray, factor: int = 2) -> np.ndarray:
    if factor < 1:
        raise ValueError("factor must be >= 1")
    x = as_tensor(x)
    if factor == 1:
        return x.copy()
    return np.repeat(np.repeat(x, factor, axis=2), factor, axis=3)


def concat(inputs: Sequence[np.ndarray], axis: int = 1) -> np.ndarray:
    """Concatenate along the channel axis; all other dimensions must agree."""
    tensors = [as_tensor(t) for t in inputs]
    if not tensors:
        raise ShapeError("concat needs at least one input")
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.shape[0] != ref[0] or t.shape[2:] != ref[2:]:
            raise ShapeError(f"cannot concat {t.shape} with {ref} along channels")
    return np.concatenate(tensors, axis=axis)
