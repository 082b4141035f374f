"""Shared test utilities."""

from __future__ import annotations

import numpy as np

from evogene.numcore import Tensor


def finite_diff_check(fn, tensors, step: float = 1e-5, rel_tol: float = 1e-4):
    """Compare reverse-mode gradients of ``fn`` against central differences.

    ``fn`` maps the tensors to a scalar Tensor. Every coordinate of every
    tensor is perturbed by ±step; the relative error uses a small absolute
    floor so coordinates whose true derivative is zero do not blow up the
    ratio. Returns the worst relative error seen.
    """
    for t in tensors:
        t.grad = None
    out = fn(*tensors)
    out.backward()
    analytic = [
        t.grad.copy() if t.grad is not None else np.zeros_like(t.data)
        for t in tensors
    ]

    worst = 0.0
    for t, a_grad in zip(tensors, analytic):
        flat = t.data.reshape(-1)
        num = np.zeros_like(flat)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + step
            up = float(fn(*tensors).data)
            flat[i] = keep - step
            down = float(fn(*tensors).data)
            flat[i] = keep
            num[i] = (up - down) / (2.0 * step)
        num = num.reshape(t.data.shape)
        denom = np.maximum(np.abs(num), np.abs(a_grad))
        denom = np.maximum(denom, 1e-6)
        rel = np.abs(num - a_grad) / denom
        worst = max(worst, float(rel.max()))
    assert worst <= rel_tol, f"worst relative gradient error {worst:.3e}"
    return worst


def leaf(rng: np.random.Generator, *shape) -> Tensor:
    return Tensor(rng.uniform(-1.0, 1.0, size=shape), requires_grad=True)
