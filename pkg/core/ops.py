"""Primitive differentiable operators on FeatureMaps.

Every forward has a matching ``*_backward`` taking the upstream gradient and
whatever the forward needs to recompute local derivatives. Arrays are
rank-4 ``(B, C, H, W)`` float64 unless stated otherwise.
"""
from typing import List, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy.special import expit

from core.errors import ShapeError

FeatureMap = NDArray[np.float64]


def check_feature_map(x: np.ndarray, name: str = "x") -> FeatureMap:
    if x.ndim != 4 or min(x.shape) < 1:
        raise ShapeError(f"{name} must be a non-empty rank-4 (B, C, H, W) array, got shape {x.shape}")
    return np.asarray(x, dtype=np.float64)


# ---------------------------------------------------------------------------
# Convolutions
# ---------------------------------------------------------------------------

def conv_output_size(size: int, kernel: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - kernel) // stride + 1


def _pad(x: FeatureMap, pad: int) -> FeatureMap:
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def _check_conv(x: FeatureMap, w: np.ndarray, b: np.ndarray) -> None:
    check_feature_map(x)
    if w.ndim != 4:
        raise ShapeError(f"kernel must be (Cout, Cin, kh, kw), got {w.shape}")
    if w.shape[1] != x.shape[1]:
        raise ShapeError(f"kernel expects {w.shape[1]} input channels, input has {x.shape[1]}")
    if b.shape != (w.shape[0],):
        raise ShapeError(f"bias shape {b.shape} does not match {w.shape[0]} output channels")


def _is_patchify(w: np.ndarray, stride: int, pad: int) -> bool:
    return pad == 0 and w.shape[2] == stride and w.shape[3] == stride and stride > 1


def conv2d(x: FeatureMap, w: np.ndarray, b: np.ndarray, stride: int = 1, pad: int = 0) -> FeatureMap:
    """Cross-correlation with zero padding; w is (Cout, Cin, kh, kw)"""
    _check_conv(x, w, b)
    bsz, _, height, width = x.shape
    cout, _, kh, kw = w.shape
    if _is_patchify(w, stride, pad):
        if height % kh or width % kw:
            raise ShapeError(f"spatial size {height}x{width} not divisible by patch {kh}")
        patches = x.reshape(bsz, x.shape[1], height // kh, kh, width // kw, kw)
        out = np.einsum("bchuwv,ocuv->bohw", patches, w)
        return out + b[None, :, None, None]

    xp = _pad(x, pad)
    out_h = conv_output_size(height, kh, stride, pad)
    out_w = conv_output_size(width, kw, stride, pad)
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"kernel {kh}x{kw} larger than padded input {xp.shape[2:]}")
    out = np.zeros((bsz, cout, out_h, out_w))
    for u in range(kh):
        for v in range(kw):
            patch = xp[:, :, u:u + stride * (out_h - 1) + 1:stride, v:v + stride * (out_w - 1) + 1:stride]
            out += np.einsum("oc,bchw->bohw", w[:, :, u, v], patch)
    return out + b[None, :, None, None]


def conv2d_backward(
    grad: FeatureMap,
    x: FeatureMap,
    w: np.ndarray,
    stride: int = 1,
    pad: int = 0
) -> Tuple[FeatureMap, np.ndarray, np.ndarray]:
    """Returns (dx, dw, db)"""
    bsz, cin, height, width = x.shape
    _, _, kh, kw = w.shape
    db = grad.sum(axis=(0, 2, 3))
    if _is_patchify(w, stride, pad):
        patches = x.reshape(bsz, cin, height // kh, kh, width // kw, kw)
        dw = np.einsum("bohw,bchuwv->ocuv", grad, patches)
        dx = np.einsum("bohw,ocuv->bchuwv", grad, w).reshape(x.shape)
        return dx, dw, db

    xp = _pad(x, pad)
    dxp = np.zeros_like(xp)
    dw = np.zeros_like(w)
    out_h, out_w = grad.shape[2], grad.shape[3]
    for u in range(kh):
        for v in range(kw):
            rows = slice(u, u + stride * (out_h - 1) + 1, stride)
            cols = slice(v, v + stride * (out_w - 1) + 1, stride)
            dw[:, :, u, v] = np.einsum("bohw,bchw->oc", grad, xp[:, :, rows, cols])
            dxp[:, :, rows, cols] += np.einsum("oc,bohw->bchw", w[:, :, u, v], grad)
    dx = dxp[:, :, pad:pad + height, pad:pad + width] if pad else dxp
    return dx, dw, db


def transposed_conv2d(x: FeatureMap, w: np.ndarray, b: np.ndarray, stride: int = 2) -> FeatureMap:
    """2x2 / stride-2 transposed convolution; w is (Cin, Cout, 2, 2).

    Adjoint of ``conv2d(., w, 0, stride=2)`` for the same weight array.
    """
    check_feature_map(x)
    if w.ndim != 4 or w.shape[2:] != (stride, stride):
        raise ShapeError(f"transposed kernel must be (Cin, Cout, {stride}, {stride}), got {w.shape}")
    if w.shape[0] != x.shape[1]:
        raise ShapeError(f"kernel expects {w.shape[0]} input channels, input has {x.shape[1]}")
    if b.shape != (w.shape[1],):
        raise ShapeError(f"bias shape {b.shape} does not match {w.shape[1]} output channels")
    bsz, _, height, width = x.shape
    out = np.einsum("bchw,couv->bohuwv", x, w).reshape(bsz, w.shape[1], height * stride, width * stride)
    return out + b[None, :, None, None]


def transposed_conv2d_backward(
    grad: FeatureMap,
    x: FeatureMap,
    w: np.ndarray,
    stride: int = 2
) -> Tuple[FeatureMap, np.ndarray, np.ndarray]:
    bsz, _, height, width = x.shape
    blocks = grad.reshape(bsz, w.shape[1], height, stride, width, stride)
    dx = np.einsum("bohuwv,couv->bchw", blocks, w)
    dw = np.einsum("bchw,bohuwv->couv", x, blocks)
    db = grad.sum(axis=(0, 2, 3))
    return dx, dw, db


# ---------------------------------------------------------------------------
# Elementwise suite
# ---------------------------------------------------------------------------

def add(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    if x.shape != y.shape:
        raise ShapeError(f"add: shapes {x.shape} and {y.shape} differ")
    return x + y


def mul(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Hadamard product with numpy broadcasting (e.g. (B,1,H,W) over channels)"""
    try:
        np.broadcast_shapes(x.shape, y.shape)
    except ValueError as exc:
        raise ShapeError(f"mul: shapes {x.shape} and {y.shape} do not broadcast") from exc
    return x * y


def reduce_to_shape(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back to ``shape``"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def mul_backward(grad: np.ndarray, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return reduce_to_shape(grad * y, x.shape), reduce_to_shape(grad * x, y.shape)


def scale(x: np.ndarray, c: float) -> np.ndarray:
    return x * c


def sigmoid(x: np.ndarray) -> np.ndarray:
    return expit(x)


def sigmoid_backward(grad: np.ndarray, out: np.ndarray) -> np.ndarray:
    return grad * out * (1.0 - out)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(grad: np.ndarray, x: np.ndarray) -> np.ndarray:
    return grad * (x > 0)


def softmax_over(x: np.ndarray, axis: int = -1) -> np.ndarray:
    if not -x.ndim <= axis < x.ndim:
        raise ShapeError(f"softmax axis {axis} invalid for rank {x.ndim}")
    shifted = np.exp(x - x.max(axis=axis, keepdims=True))
    return shifted / shifted.sum(axis=axis, keepdims=True)


def softmax_backward(grad: np.ndarray, out: np.ndarray, axis: int = -1) -> np.ndarray:
    return out * (grad - np.sum(grad * out, axis=axis, keepdims=True))


def concat_channels(parts: Sequence[FeatureMap]) -> FeatureMap:
    first = parts[0]
    for part in parts[1:]:
        if part.shape[0] != first.shape[0] or part.shape[2:] != first.shape[2:]:
            raise ShapeError(f"concat: shapes {first.shape} and {part.shape} disagree on B, H, W")
    return np.concatenate(parts, axis=1)


def split_channels(grad: FeatureMap, sizes: Sequence[int]) -> List[FeatureMap]:
    """Inverse of concat_channels for gradients"""
    return np.split(grad, np.cumsum(sizes)[:-1], axis=1)


def avg_pool2(x: FeatureMap) -> FeatureMap:
    bsz, channels, height, width = x.shape
    if height % 2 or width % 2:
        raise ShapeError(f"avg_pool2 needs even spatial size, got {height}x{width}")
    return x.reshape(bsz, channels, height // 2, 2, width // 2, 2).mean(axis=(3, 5))


def avg_pool2_backward(grad: FeatureMap) -> FeatureMap:
    return np.repeat(np.repeat(grad, 2, axis=2), 2, axis=3) * 0.25


def bilinear_matrix(out_size: int, in_size: int) -> np.ndarray:
    """Corner-aligned linear interpolation weights, shape (out_size, in_size)"""
    weights = np.zeros((out_size, in_size))
    if in_size == 1 or out_size == 1:
        weights[:, 0] = 1.0
        return weights
    for i in range(out_size):
        src = i * (in_size - 1) / (out_size - 1)
        lo = min(int(np.floor(src)), in_size - 1)
        hi = min(lo + 1, in_size - 1)
        frac = src - lo
        weights[i, lo] += 1.0 - frac
        weights[i, hi] += frac
    return weights


def upsample_bilinear(x: FeatureMap, height: int, width: int) -> FeatureMap:
    rows = bilinear_matrix(height, x.shape[2])
    cols = bilinear_matrix(width, x.shape[3])
    return np.einsum("oh,bchw,pw->bcop", rows, x, cols)


def upsample_bilinear_backward(grad: FeatureMap, in_height: int, in_width: int) -> FeatureMap:
    rows = bilinear_matrix(grad.shape[2], in_height)
    cols = bilinear_matrix(grad.shape[3], in_width)
    return np.einsum("oh,bcop,pw->bchw", rows, grad, cols)
