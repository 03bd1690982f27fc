"""Reverse-mode autodiff tensor engine."""

from . import functional
from .functional import conv2d, grid_inside, grid_sample, identity_grid, pad, pixel_centers, resize
from .gradcheck import gradcheck, numerical_grad
from .optim import Adam, OptimizerHyper, SGDMomentum, make_optimizer, optimizer_step
from .parallel import get_num_threads, set_num_threads
from .tensor import (
    GradGraph,
    ShapeError,
    Tensor,
    abs_,
    atan2,
    backward,
    cat,
    clamp,
    cos,
    current_graph,
    default_dtype,
    div,
    elementwise,
    exp,
    get_default_dtype,
    grad,
    inverse,
    is_grad_enabled,
    log,
    logsumexp,
    matmul,
    maximum,
    minimum,
    no_grad,
    ones,
    pow,
    reduce,
    set_default_dtype,
    sigmoid,
    sin,
    softmax,
    softplus,
    sqrt,
    stack,
    take,
    tanh,
    tensor,
    where,
    zeros,
)
