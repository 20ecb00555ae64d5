"""Deterministic, platform-independent random number generator.

All synthetic-data generators in this package draw from this xorshift128+
generator so that a fixed seed produces byte-identical output on every
platform and Python build.  The update equations are:

    s1 ^= s1 << 23          (mod 2^64)
    s1 ^= s1 >> 17
    s1 ^= s0 ^ (s0 >> 26)
    output = (s0 + s1) mod 2^64

State is seeded from a single 64-bit integer via the splitmix64 expander.
"""

from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class Rng:
    """xorshift128+ generator with convenience draws used by the simulators."""

    def __init__(self, seed: int):
        seed &= _MASK64
        s0 = _splitmix64(seed)
        s1 = _splitmix64(s0)
        # all-zero state is invalid for xorshift
        self._s0 = s0 or 0x1
        self._s1 = s1 or 0x2
        self._gauss_spare: float | None = None

    def next_u64(self) -> int:
        s1 = self._s0
        s0 = self._s1
        self._s0 = s0
        s1 = (s1 ^ (s1 << 23)) & _MASK64
        s1 ^= s1 >> 17
        s1 ^= s0 ^ (s0 >> 26)
        self._s1 = s1
        return (s0 + s1) & _MASK64

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive."""
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        span = hi - lo + 1
        return lo + self.next_u64() % span

    def gauss(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        """Box-Muller transform; one spare deviate is cached."""
        if self._gauss_spare is not None:
            z = self._gauss_spare
            self._gauss_spare = None
            return mu + sigma * z
        u1 = self.random()
        while u1 <= 1e-300:
            u1 = self.random()
        u2 = self.random()
        r = math.sqrt(-2.0 * math.log(u1))
        self._gauss_spare = r * math.sin(2.0 * math.pi * u2)
        return mu + sigma * r * math.cos(2.0 * math.pi * u2)

    def geometric(self, mean: float) -> int:
        """Geometric draw with the given mean (support {1, 2, ...})."""
        if mean < 1.0:
            raise ValueError("mean must be >= 1")
        if mean == 1.0:
            return 1
        p = 1.0 / mean
        u = self.random()
        while u <= 1e-300:
            u = self.random()
        return 1 + int(math.log(u) / math.log(1.0 - p))

    def choice_index(self, n: int) -> int:
        return self.next_u64() % n
