"""SplitMix64 pseudo-random generator with Box-Muller gaussians.

Pure-integer 64-bit state, so identical seeds give bit-identical streams on
every platform and Python build. This is the single source of randomness
for synthetic data, label flipping, weight init, and epoch shuffles.
"""

from __future__ import annotations

import math

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """Deterministic u64 stream; one additive step + avalanche per draw."""

    def __init__(self, seed: int):
        self._state = seed & _MASK
        self._spare_gauss: float | None = None

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform float64 in [0, 1), 53 significant bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def randint_below(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via rejection."""
        if n <= 0:
            raise ValueError("n must be positive")
        threshold = ((1 << 64) // n) * n
        while True:
            u = self.next_u64()
            if u < threshold:
                return u % n

    def gauss(self) -> float:
        """Standard normal via Box-Muller, drawing uniforms in pairs."""
        if self._spare_gauss is not None:
            z = self._spare_gauss
            self._spare_gauss = None
            return z
        # u1 in (0, 1] keeps log finite
        u1 = ((self.next_u64() >> 11) + 1) * 2.0**-53
        u2 = (self.next_u64() >> 11) * 2.0**-53
        r = math.sqrt(-2.0 * math.log(u1))
        theta = 2.0 * math.pi * u2
        self._spare_gauss = r * math.sin(theta)
        return r * math.cos(theta)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint_below(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample_without_replacement(self, n: int, k: int) -> list[int]:
        """k distinct indices from range(n), in draw order."""
        if not 0 <= k <= n:
            raise ValueError("need 0 <= k <= n")
        pool = list(range(n))
        for i in range(k):
            j = i + self.randint_below(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]


def derive_seed(base: int, *words: int) -> int:
    """Mix extra integers into a base seed for independent substreams."""
    s = base & _MASK
    for w in words:
        s = (s ^ ((w & _MASK) + _GOLDEN + ((s << 6) & _MASK) + (s >> 2))) & _MASK
        z = ((s ^ (s >> 30)) * _MIX1) & _MASK
        s = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return s
