"""Named parameter collections and plain SGD."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError, NumericError
from .rng import Rng
from .tensor import Tensor


class ParamStore:
    """Ordered mapping of parameter names to trainable tensors.

    Matrices get uniform Glorot initialization, biases start at zero.
    All randomness flows through the store's own Rng so two stores built
    with the same seed and the same sequence of calls hold identical
    values.
    """

    def __init__(self, seed: int, key: tuple = ()):
        self._params: dict[str, Tensor] = {}
        self._rng = Rng.derive(seed, *key) if key else Rng(seed)

    def matrix(self, name: str, fan_in: int, fan_out: int) -> Tensor:
        if name in self._params:
            raise DimensionError(f"duplicate parameter name {name!r}")
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        data = self._rng.uniform(-limit, limit, size=(fan_in, fan_out))
        t = Tensor(data, requires_grad=True)
        self._params[name] = t
        return t

    def bias(self, name: str, size: int) -> Tensor:
        if name in self._params:
            raise DimensionError(f"duplicate parameter name {name!r}")
        t = Tensor(np.zeros(size), requires_grad=True)
        self._params[name] = t
        return t

    def buffer(self, name: str, value) -> Tensor:
        """Non-trainable named array (normalization stats and the like).

        Saved and loaded with the parameters but never touched by
        sgd_step, since it accumulates no gradient.
        """
        if name in self._params:
            raise DimensionError(f"duplicate parameter name {name!r}")
        t = Tensor(np.asarray(value, dtype=np.float64))
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def tensors(self) -> list[Tensor]:
        return list(self._params.values())

    def items(self):
        return self._params.items()

    def zero_grads(self):
        for t in self._params.values():
            t.grad = None

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Copies of the current values, keyed by name."""
        return {k: v.data.copy() for k, v in self._params.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]):
        """Overwrite parameter values in place from ``state_arrays`` output."""
        missing = set(self._params) - set(arrays)
        extra = set(arrays) - set(self._params)
        if missing or extra:
            raise DimensionError(
                f"parameter names do not match: missing={sorted(missing)} "
                f"extra={sorted(extra)}"
            )
        for k, t in self._params.items():
            arr = np.asarray(arrays[k], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise DimensionError(
                    f"shape mismatch for {k!r}: {arr.shape} vs {t.data.shape}"
                )
            t.data = arr.copy()


def sgd_step(params, lr: float):
    """In-place gradient descent update; grads are zeroed afterwards.

    ``params`` is a ParamStore or an iterable of tensors. Tensors with no
    accumulated gradient are skipped. A non-finite gradient aborts the
    step before any tensor is touched.
    """
    tensors = params.tensors() if isinstance(params, ParamStore) else list(params)
    live = [t for t in tensors if t.grad is not None]
    for t in live:
        if not np.all(np.isfinite(t.grad)):
            raise NumericError("non-finite gradient in sgd_step")
    for t in live:
        t.data = t.data - lr * t.grad
        t.grad = None
