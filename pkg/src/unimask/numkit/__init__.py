"""Minimal float64 tensor core with reverse-mode autodiff."""
from .dct import dct, dct_matrix, idct
from .gradcheck import check_gradients, numerical_gradient, relative_error
from .tensor import (
    Tensor,
    add,
    as_tensor,
    concat,
    div,
    exp,
    gelu,
    getitem,
    is_grad_enabled,
    layer_norm,
    log,
    matmul,
    mul,
    neg,
    no_grad,
    power,
    reshape,
    softmax,
    sqrt,
    square,
    stack,
    sub,
    tabs,
    tmean,
    topological_order,
    transpose,
    tsum,
    where,
)

__all__ = [
    "Tensor", "add", "as_tensor", "check_gradients", "concat", "dct", "dct_matrix",
    "div", "exp", "gelu", "getitem", "idct", "is_grad_enabled", "layer_norm", "log",
    "matmul", "mul", "neg", "no_grad", "numerical_gradient", "power", "relative_error",
    "reshape", "softmax", "sqrt", "square", "stack", "sub", "tabs", "tmean",
    "topological_order", "transpose", "tsum", "where",
]
