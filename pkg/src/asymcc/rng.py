"""Portable 64-bit PRNG: xoshiro256** seeded through splitmix64.

numpy's bit generators do not promise identical streams across versions, so
every stochastic path in the package draws from this generator instead.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_TWO_M53 = 1.0 / (1 << 53)


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state; return ``(new_state, output)``."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


class Xoshiro256:
    """xoshiro256** generator.

    >>> Xoshiro256(0).next_u64() == Xoshiro256(0).next_u64()
    True
    """

    __slots__ = ("_s",)

    def __init__(self, seed: int = 0):
        state = int(seed) & _MASK
        s = []
        for _ in range(4):
            state, out = splitmix64(state)
            s.append(out)
        self._s = s

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK, 7) * 9) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def random(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * _TWO_M53

    def uniforms(self, size: int) -> np.ndarray:
        # Inlined loop; this is the hot path for bulk sampling.
        s0, s1, s2, s3 = self._s
        out = np.empty(size, dtype=np.float64)
        m = _MASK
        for i in range(size):
            r = ((s1 * 5) & m)
            r = (((r << 7) | (r >> 57)) & m) * 9 & m
            out[i] = (r >> 11) * _TWO_M53
            t = (s1 << 17) & m
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) | (s3 >> 19)) & m
        self._s = [s0, s1, s2, s3]
        return out

    def randbelow(self, n: int) -> int:
        """Unbiased integer in [0, n) by rejection."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            v = self.next_u64()
            if v < limit:
                return v % n

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def state(self) -> tuple[int, int, int, int]:
        return tuple(self._s)
