"""Deterministic 64-bit PRNG owned per run.

The generator is splitmix64 (Steele, Lea & Flood's mixer, the xorshift-multiply
family used to seed xoshiro): the k-th output is ``mix64(seed + k * GAMMA)``.
Because each output depends only on the seed and the draw index, batches of
draws can be produced with vectorized uint64 arithmetic while staying
bit-identical to one-at-a-time generation.  No global random state anywhere.
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

_U53_INV = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    """splitmix64 finalizer on a 64-bit integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, tag: int) -> int:
    """A decorrelated child seed for an independent stream."""
    return mix64((seed + (tag + 1) * 0xD1B54A32D192ED03) & MASK64)


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


class Prng:
    """Counter-based splitmix64 stream."""

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self.count = 0

    def clone(self) -> "Prng":
        c = Prng(self.seed)
        c.count = self.count
        return c

    def next_u64(self) -> int:
        self.count += 1
        return mix64((self.seed + self.count * GAMMA) & MASK64)

    def u64_array(self, n: int) -> np.ndarray:
        ks = np.arange(self.count + 1, self.count + n + 1, dtype=np.uint64)
        self.count += n
        return _mix_array(np.uint64(self.seed) + ks * np.uint64(GAMMA))

    def uniform(self, n: int = 1) -> np.ndarray:
        """n doubles uniform in [0, 1)."""
        return (self.u64_array(n) >> np.uint64(11)).astype(np.float64) * _U53_INV

    def next_uniform(self) -> float:
        return (self.next_u64() >> 11) * _U53_INV

    def randint(self, bound: int) -> int:
        """One integer uniform in [0, bound)."""
        return (self.next_u64() * bound) >> 64

    def normal(self, shape, std: float = 1.0, dtype=np.float32) -> np.ndarray:
        """Gaussian draws via Box-Muller on consecutive uniform pairs."""
        n = int(np.prod(shape)) if shape else 1
        pairs = (n + 1) // 2
        u = self.u64_array(2 * pairs)
        # u1 in (0, 1] so the log is finite
        u1 = ((u[:pairs] >> np.uint64(11)).astype(np.float64) + 1.0) * _U53_INV
        u2 = (u[pairs:] >> np.uint64(11)).astype(np.float64) * _U53_INV
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * math.pi * u2
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return (out * std).reshape(shape).astype(dtype)

    def shuffled_indices(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        idx = np.arange(n)
        for i in range(n - 1, 0, -1):
            j = self.randint(i + 1)
            idx[i], idx[j] = idx[j], idx[i]
        return idx
