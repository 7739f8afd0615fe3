"""NN Package - float64 tensors with reverse-mode differentiation and layer ops."""

from .ops import (
    additive_angular_margin,
    concat,
    conv2d,
    cross_entropy,
    dense,
    global_avg_pool,
    l2_normalize_rows,
    max_pool2d,
    relu,
    reshape,
    transpose,
)
from .tensor import Tensor, gradients, no_grad, parameter

__all__ = [
    "Tensor",
    "gradients",
    "no_grad",
    "parameter",
    "additive_angular_margin",
    "concat",
    "conv2d",
    "cross_entropy",
    "dense",
    "global_avg_pool",
    "l2_normalize_rows",
    "max_pool2d",
    "relu",
    "reshape",
    "transpose",
]
