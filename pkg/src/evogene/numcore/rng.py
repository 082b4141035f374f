"""Deterministic random streams.

All randomness in the package flows through :class:`Rng`, seeded PCG64.
Standard normals are produced by the Box-Muller transform over the uniform
stream (z0 = sqrt(-2 ln u1) cos(2 pi u2), z1 = ... sin(...)), so the normal
stream is a documented function of the uniform stream. Identical seeds give
identical streams.
"""

from __future__ import annotations

import numpy as np


class Rng:
    """Seeded random stream: uniform, standard_normal, permutation."""

    def __init__(self, seed: int, _key: tuple = ()):
        self.seed = int(seed)
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=_key))
        )

    @classmethod
    def derive(cls, seed: int, *key: int) -> "Rng":
        """Independent stream for (seed, key...), e.g. per (seed, epoch)."""
        return cls(seed, _key=tuple(int(k) for k in key))

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        return self._gen.uniform(low, high, size=size)

    def standard_normal(self, size=None):
        n = 1 if size is None else int(np.prod(size))
        pairs = (n + 1) // 2
        # u1 in (0, 1]: 1 - random() never hits 0, so the log is finite
        u1 = 1.0 - self._gen.random(pairs)
        u2 = self._gen.random(pairs)
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])[:n]
        if size is None:
            return float(z[0])
        return z.reshape(size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integer(self, n: int) -> int:
        """Uniform index in [0, n), derived from one uniform draw."""
        return min(int(self._gen.random() * n), n - 1)

    def choice_weighted(self, weights: np.ndarray) -> int:
        """Index drawn proportionally to non-negative weights (uniform if all zero)."""
        total = float(np.sum(weights))
        if total <= 0.0:
            return self.integer(len(weights))
        cdf = np.cumsum(weights) / total
        return min(int(np.searchsorted(cdf, self._gen.random(), side="right")), len(weights) - 1)
