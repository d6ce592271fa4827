"""Portable random streams: splitmix64 seeding into xoshiro256++.

The generator is written out explicitly (rather than borrowed from numpy) so a
given seed yields the same stream in any language that implements the same
two published algorithms.
"""
from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> tuple[int, int]:
    """Advance a splitmix64 state; returns (new_state, output)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return x, z ^ (z >> 31)


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & _MASK
    return h


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


class RandomSource:
    """xoshiro256++ stream with uniform and Box-Muller normal draws.

    ``derive(label)`` returns an independent child stream keyed on
    ``(seed, label)``, so adding a new consumer never shifts another
    consumer's numbers.
    """

    def __init__(self, seed: int):
        if not 0 <= int(seed) <= _MASK:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = int(seed)
        x = self.seed
        state = []
        for _ in range(4):
            x, out = splitmix64(x)
            state.append(out)
        self._s = state

    def derive(self, label: str) -> "RandomSource":
        _, child = splitmix64(self.seed ^ fnv1a64(label.encode("utf-8")))
        return RandomSource(child)

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s0 + s3) & _MASK, 23) + s0) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def uniform(self) -> float:
        """Uniform on [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def uniforms(self, n: int) -> np.ndarray:
        return np.array([self.uniform() for _ in range(n)], dtype=np.float64)

    def normals(self, n: int) -> np.ndarray:
        # Box-Muller in pairs; both outputs are used and an odd tail draw is discarded.
        out = np.empty(n, dtype=np.float64)
        i = 0
        while i < n:
            u1 = 1.0 - self.uniform()  # (0, 1]
            u2 = self.uniform()
            r = math.sqrt(-2.0 * math.log(u1))
            out[i] = r * math.cos(2.0 * math.pi * u2)
            if i + 1 < n:
                out[i + 1] = r * math.sin(2.0 * math.pi * u2)
            i += 2
        return out

    def normal_matrix(self, rows: int, cols: int, std: float = 1.0) -> np.ndarray:
        return (std * self.normals(rows * cols)).reshape(rows, cols)

    def below(self, n: int) -> int:
        """Integer in [0, n) by multiply-shift (bias below 2**-53 for small n)."""
        if n < 1:
            raise ValueError(f"below() needs n >= 1, got {n}")
        return min(int(self.uniform() * n), n - 1)

    def permutation(self, n: int) -> np.ndarray:
        p = np.arange(n)
        for i in range(n - 1, 0, -1):
            j = self.below(i + 1)
            p[i], p[j] = p[j], p[i]
        return p
