"""Portable 64-bit pseudo-random generator (xoshiro256** seeded by splitmix64).

Every random draw in the package goes through :class:`Xoshiro256` so that a
seed means the same thing in any implementation of the algorithms. numpy's
generators are not used for anything that has to be reproducible.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# fixed sub-stream ids used by derive_seed
STREAM_DATA = 1
STREAM_INITIAL = 2
STREAM_TRAIN = 3
STREAM_SELECT = 4


def splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step. Returns ``(new_state, output)``."""
    state = (state + _GOLDEN) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def derive_seed(seed: int, *keys: int) -> int:
    """Mix a master seed with integer keys into an independent 64-bit seed."""
    state = seed & MASK64
    for key in keys:
        state, out = splitmix64(state ^ (key & MASK64))
        state = out
    _, out = splitmix64(state)
    return out


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256:
    """xoshiro256** with a few convenience samplers.

    >>> Xoshiro256(0).next_u64() == Xoshiro256(0).next_u64()
    True
    """

    __slots__ = ("_s",)

    def __init__(self, seed: int):
        state = seed & MASK64
        s = []
        for _ in range(4):
            state, out = splitmix64(state)
            s.append(out)
        self._s = s

    @classmethod
    def from_state(cls, state: Sequence[int]) -> "Xoshiro256":
        """Build a generator from a raw 4-word state (for reference vectors)."""
        if len(state) != 4 or not any(state):
            raise ValueError("state must be four words, not all zero")
        gen = cls(0)
        gen._s = [w & MASK64 for w in state]
        return gen

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
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
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def integer(self, bound: int) -> int:
        """Unbiased integer in [0, bound) (Lemire's multiply-shift method)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        m = self.next_u64() * bound
        low = m & MASK64
        if low < bound:
            threshold = ((1 << 64) - bound) % bound
            while low < threshold:
                m = self.next_u64() * bound
                low = m & MASK64
        return m >> 64

    def normal(self) -> float:
        """Standard normal via Box-Muller; one variate per two uniforms."""
        u1 = 1.0 - self.random()
        u2 = self.random()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def normals(self, size: int) -> np.ndarray:
        return np.array([self.normal() for _ in range(size)], dtype=np.float64)

    def uniforms(self, size: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        width = high - low
        return np.array([low + width * self.random() for _ in range(size)], dtype=np.float64)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.integer(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n_or_items: int | Sequence) -> list:
        items = list(range(n_or_items)) if isinstance(n_or_items, int) else list(n_or_items)
        self.shuffle(items)
        return items

    def sample(self, items: Sequence, k: int) -> list:
        """``k`` distinct elements, uniformly, via a partial Fisher-Yates pass."""
        pool = list(items)
        if not 0 <= k <= len(pool):
            raise ValueError("sample size out of range")
        n = len(pool)
        for i in range(k):
            j = i + self.integer(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]
