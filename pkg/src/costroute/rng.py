"""SplitMix64 stream with the uniform and Gaussian transforms used for
initialization, shuffling and synthetic data.

Everything here is integer arithmetic on 64-bit words, so the streams are
bit-reproducible on any platform.
"""

from __future__ import annotations

import math

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_TWO_POW_M53 = 1.0 / (1 << 53)


class SplitMix64:
    def __init__(self, seed: int):
        self.state = int(seed) & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * _TWO_POW_M53

    def uniform_open0(self) -> float:
        """Uniform double in (0, 1]; safe as a logarithm argument."""
        return ((self.next_u64() >> 11) + 1) * _TWO_POW_M53

    def gauss(self) -> float:
        """Standard normal via Box-Muller (cosine branch only).

        Consumes exactly two words per call so stream positions stay
        predictable.
        """
        u1 = self.uniform_open0()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def below(self, n: int) -> int:
        """Integer in [0, n) by rejection, without modulo bias."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def permutation(self, n: int) -> list[int]:
        """Fisher-Yates shuffle of range(n)."""
        idx = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.below(i + 1)
            idx[i], idx[j] = idx[j], idx[i]
        return idx
