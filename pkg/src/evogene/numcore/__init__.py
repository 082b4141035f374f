"""Numeric core: tensors with reverse-mode gradients, RNG, parameters."""

from .rng import Rng
from .tensor import Tensor, no_grad
from . import tensor as ops_t
from .ops import (
    activation,
    affine,
    loss_cross_entropy,
    loss_mse,
    rnn_cell,
)
from .params import ParamStore, sgd_step

__all__ = [
    "Rng",
    "Tensor",
    "no_grad",
    "ops_t",
    "activation",
    "affine",
    "loss_cross_entropy",
    "loss_mse",
    "rnn_cell",
    "ParamStore",
    "sgd_step",
]
