from .tensor import DTYPE, Function, Tape, Tensor, backward
from .functional import (
    LossTensor,
    concat,
    elementwise,
    expand,
    input_gradient,
    layer_norm,
    matmul,
    pad_left,
    relu,
    reshape,
    sigmoid,
    softmax,
    softmax_array,
    softmax_cross_entropy,
    stack,
    tanh,
    transpose,
)

__all__ = [
    "DTYPE",
    "Function",
    "LossTensor",
    "Tape",
    "Tensor",
    "backward",
    "concat",
    "elementwise",
    "expand",
    "input_gradient",
    "layer_norm",
    "matmul",
    "pad_left",
    "relu",
    "reshape",
    "sigmoid",
    "softmax",
    "softmax_array",
    "softmax_cross_entropy",
    "stack",
    "tanh",
    "transpose",
]
