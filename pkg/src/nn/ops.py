"""
Differentiable Operations

Functional layer ops over Tensor, each with an explicit backward rule:
conv2d (cross-correlation, no kernel flip), relu, max_pool2d,
global_avg_pool, dense, concat, reshape, row L2 normalization, the additive
angular margin transform and softmax cross-entropy.

Image tensors are [N, C, H, W]; a single [C, H, W] image is accepted and
returned unbatched.
"""

from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.errors import PreconditionError, ShapeError

from .tensor import Tensor


def reshape(x: Tensor, shape: Tuple[int, ...]) -> Tensor:
    original = x.shape
    return Tensor.from_op(
        x.data.reshape(shape), (x,), lambda g: (g.reshape(original),), "reshape"
    )


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return Tensor.from_op(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,), "relu")


# =============================================================================
# Convolution and pooling
# =============================================================================

def conv2d(
    x: Tensor,
    kernels: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """
    2-D cross-correlation.

    Args:
        x: [N, C_in, H, W] or [C_in, H, W]
        kernels: [C_out, C_in, k, k]
        bias: optional [C_out]
        stride: step between windows
        padding: zero padding on every side

    Returns:
        [N, C_out, H_out, W_out] with H_out = floor((H + 2p - k) / stride) + 1

    Raises:
        ShapeError: channel mismatch or kernel larger than the padded input
    """
    unbatched = x.ndim == 3
    if unbatched:
        x = reshape(x, (1,) + x.shape)
    if x.ndim != 4 or kernels.ndim != 4:
        raise ShapeError(f"conv2d expects 4-D input and kernels, got {x.shape} and {kernels.shape}")
    n, c_in, h, w = x.shape
    c_out, k_in, kh, kw = kernels.shape
    if k_in != c_in:
        raise ShapeError(f"conv2d channel mismatch: input {x.shape}, kernels {kernels.shape}")
    if kh > h + 2 * padding or kw > w + 2 * padding:
        raise ShapeError(
            f"conv2d kernel {kernels.shape} larger than padded input {x.shape} (padding={padding})"
        )
    if bias is not None and bias.shape != (c_out,):
        raise ShapeError(f"conv2d bias shape {bias.shape} does not match {c_out} output channels")

    padded = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    # [N, C_in, H_out, W_out, kh, kw]
    cols = sliding_window_view(padded, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    h_out, w_out = cols.shape[2], cols.shape[3]
    weights = kernels.data
    out = np.tensordot(cols, weights, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data.reshape(1, c_out, 1, 1)

    def backward(g: np.ndarray):
        grad_kernels = np.tensordot(g, cols, axes=([0, 2, 3], [0, 2, 3]))
        # [N, H_out, W_out, C_in, kh, kw]
        grad_cols = np.tensordot(g, weights, axes=([1], [0]))
        grad_padded = np.zeros_like(padded)
        for i in range(kh):
            for j in range(kw):
                grad_padded[
                    :, :, i:i + stride * h_out:stride, j:j + stride * w_out:stride
                ] += grad_cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        grad_x = grad_padded[:, :, padding:padding + h, padding:padding + w]
        grads = [grad_x, grad_kernels]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    parents = (x, kernels) if bias is None else (x, kernels, bias)
    result = Tensor.from_op(out, parents, backward, "conv2d")
    if unbatched:
        result = reshape(result, result.shape[1:])
    return result


def max_pool2d(x: Tensor, kernel: int = 2, stride: Optional[int] = None) -> Tensor:
    """
    Max pooling over non-overlapping kernel x kernel windows.

    Trailing rows/columns that do not fill a window are dropped. On ties the
    first maximum in row-major window order receives the gradient.
    """
    stride = stride or kernel
    if stride != kernel:
        raise ShapeError("max_pool2d supports stride == kernel only")
    unbatched = x.ndim == 3
    data = x.data[np.newaxis] if unbatched else x.data
    if data.ndim != 4:
        raise ShapeError(f"max_pool2d expects 3-D or 4-D input, got {x.shape}")
    n, c, h, w = data.shape
    h_out, w_out = h // kernel, w // kernel
    if h_out == 0 or w_out == 0:
        raise ShapeError(f"max_pool2d kernel {kernel} larger than input {x.shape}")

    cropped = data[:, :, :h_out * kernel, :w_out * kernel]
    windows = (
        cropped.reshape(n, c, h_out, kernel, w_out, kernel)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, h_out, w_out, kernel * kernel)
    )
    winner = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, winner[..., np.newaxis], axis=-1)[..., 0]
    if unbatched:
        out = out[0]

    def backward(g: np.ndarray):
        g4 = g[np.newaxis] if unbatched else g
        grad_windows = np.zeros_like(windows)
        np.put_along_axis(grad_windows, winner[..., np.newaxis], g4[..., np.newaxis], axis=-1)
        grad_cropped = (
            grad_windows.reshape(n, c, h_out, w_out, kernel, kernel)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(n, c, h_out * kernel, w_out * kernel)
        )
        grad = np.zeros_like(data)
        grad[:, :, :h_out * kernel, :w_out * kernel] = grad_cropped
        return (grad[0] if unbatched else grad,)

    return Tensor.from_op(out, (x,), backward, "max_pool2d")


def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over the spatial axes: [N, C, H, W] -> [N, C]."""
    if x.ndim != 4:
        raise ShapeError(f"global_avg_pool expects [N, C, H, W], got {x.shape}")
    n, c, h, w = x.shape

    def backward(g: np.ndarray):
        return (np.broadcast_to(g[:, :, None, None] / (h * w), x.shape).copy(),)

    return Tensor.from_op(x.data.mean(axis=(2, 3)), (x,), backward, "global_avg_pool")


# =============================================================================
# Dense layers
# =============================================================================

def dense(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """
    Affine map y = x W^T + b.

    Args:
        x: [N, in] or [in]
        weight: [out, in]
        bias: optional [out]
    """
    if weight.ndim != 2 or x.shape[-1] != weight.shape[1]:
        raise ShapeError(f"dense shape mismatch: input {x.shape}, weight {weight.shape}")
    if bias is not None and bias.shape != (weight.shape[0],):
        raise ShapeError(f"dense bias shape {bias.shape} does not match weight {weight.shape}")
    unbatched = x.ndim == 1
    inputs = reshape(x, (1, x.shape[0])) if unbatched else x
    out = inputs @ transpose(weight)
    if bias is not None:
        out = out + bias
    return reshape(out, (out.shape[1],)) if unbatched else out


def transpose(x: Tensor) -> Tensor:
    """Matrix transpose of a 2-D tensor."""
    return Tensor.from_op(x.data.T, (x,), lambda g: (g.T,), "transpose")


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    """Join along the feature axis (last by default)."""
    if not tensors:
        raise ShapeError("concat needs at least one tensor")
    reference = tensors[0].shape
    axis = axis % len(reference)
    for tensor in tensors[1:]:
        if len(tensor.shape) != len(reference) or any(
            a != b for d, (a, b) in enumerate(zip(tensor.shape, reference)) if d != axis
        ):
            raise ShapeError(
                f"concat shape mismatch: {[t.shape for t in tensors]} along axis {axis}"
            )
    sizes = [tensor.shape[axis] for tensor in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g: np.ndarray):
        return np.split(g, splits, axis=axis)

    return Tensor.from_op(
        np.concatenate([tensor.data for tensor in tensors], axis=axis),
        tuple(tensors),
        backward,
        "concat",
    )


# =============================================================================
# Metric-learning head
# =============================================================================

def l2_normalize_rows(x: Tensor, eps: float = 1e-12) -> Tensor:
    """Scale each row of a 2-D tensor to unit norm (norm floored at eps)."""
    if x.ndim != 2:
        raise ShapeError(f"l2_normalize_rows expects 2-D input, got {x.shape}")
    norms = np.maximum(np.linalg.norm(x.data, axis=1, keepdims=True), eps)
    y = x.data / norms

    def backward(g: np.ndarray):
        return ((g - y * np.sum(g * y, axis=1, keepdims=True)) / norms,)

    return Tensor.from_op(y, (x,), backward, "l2_normalize_rows")


def additive_angular_margin(
    cosine: Tensor, labels: np.ndarray, margin: float, clamp: float = 1e-7
) -> Tensor:
    """
    Replace each row's true-class cosine c with cos(arccos(c) + margin).

    c is clamped to [-1 + clamp, 1 - clamp] before arccos; other entries pass
    through unchanged.
    """
    if cosine.ndim != 2 or labels.shape != (cosine.shape[0],):
        raise ShapeError(f"additive_angular_margin: cosine {cosine.shape}, labels {labels.shape}")
    rows = np.arange(cosine.shape[0])
    target = cosine.data[rows, labels]
    clamped = np.clip(target, -1.0 + clamp, 1.0 - clamp)
    theta = np.arccos(clamped)
    out = cosine.data.copy()
    out[rows, labels] = np.cos(theta + margin)

    inside = (target > -1.0 + clamp) & (target < 1.0 - clamp)
    slope = np.where(inside, np.sin(theta + margin) / np.sqrt(1.0 - clamped ** 2), 0.0)

    def backward(g: np.ndarray):
        grad = g.copy()
        grad[rows, labels] = g[rows, labels] * slope
        return (grad,)

    return Tensor.from_op(out, (cosine,), backward, "angular_margin")


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """
    Mean softmax cross-entropy of integer labels.

    Raises:
        PreconditionError: empty batch
    """
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(f"cross_entropy: logits {logits.shape}, labels {labels.shape}")
    batch = logits.shape[0]
    if batch == 0:
        raise PreconditionError("cross_entropy on an empty batch")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    rows = np.arange(batch)
    loss = -log_probs[rows, labels].mean()

    def backward(g: np.ndarray):
        probs = np.exp(log_probs)
        probs[rows, labels] -= 1.0
        return (probs * (g / batch),)

    return Tensor.from_op(np.asarray(loss), (logits,), backward, "cross_entropy")
