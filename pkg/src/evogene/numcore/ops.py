"""Composite network operations built on the tensor engine."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError, NumericError
from . import tensor as T
from .tensor import Tensor

_EPS = 1e-12


def affine(x, w, b) -> Tensor:
    """x @ w + b with b broadcast across rows."""
    return T.add(T.matmul(x, w), b)


_ACTIVATIONS = {
    "tanh": T.tanh,
    "relu": T.relu,
    "sigmoid": T.sigmoid,
    "exp": T.exp,
    "softmax": T.softmax_rows,
    "softmax-rows": T.softmax_rows,
}


def activation(x, kind: str) -> Tensor:
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise DimensionError(f"unknown activation {kind!r}") from None
    return fn(x)


def rnn_cell(x, h_prev, w_in, w_rec, b) -> Tensor:
    """One recurrent step: tanh(x @ w_in + h_prev @ w_rec + b)."""
    return T.tanh(T.add(T.add(T.matmul(x, w_in), T.matmul(h_prev, w_rec)), b))


def _wrap(x):
    if isinstance(x, Tensor):
        return x, True
    return Tensor(np.asarray(x, dtype=np.float64)), False


def loss_mse(pred, target):
    """Mean squared error over all elements.

    Returns a Tensor when either argument is one, otherwise a float.
    """
    p, p_live = _wrap(pred)
    t, t_live = _wrap(target)
    if p.data.shape != t.data.shape:
        raise DimensionError(
            f"mse shapes differ: {p.data.shape} vs {t.data.shape}"
        )
    out = T.tmean(T.square(T.sub(p, t)))
    if p_live or t_live:
        return out
    return float(out.data)


def loss_cross_entropy(probs, labels):
    """Mean negative log probability of the true class.

    ``probs`` is (n, k) with rows summing to one; ``labels`` is a length-n
    integer vector. Probabilities are clamped at 1e-12 before the log.
    Returns a Tensor when ``probs`` is one, otherwise a float.
    """
    p, live = _wrap(probs)
    y = np.asarray(labels, dtype=np.int64)
    if p.data.ndim != 2:
        raise DimensionError("cross entropy expects (n, k) probabilities")
    if y.ndim != 1 or y.shape[0] != p.data.shape[0]:
        raise DimensionError("labels must be a length-n integer vector")
    if y.size and (y.min() < 0 or y.max() >= p.data.shape[1]):
        raise DimensionError("label id out of range")
    row_sums = p.data.sum(axis=1)
    if not np.allclose(row_sums, 1.0, atol=1e-6):
        raise NumericError("probability rows must sum to 1")
    picked = T.gather_rows(p, y)
    out = T.scale(T.tmean(T.log(T.clamp_min(picked, _EPS))), -1.0)
    if live:
        return out
    return float(out.data)
