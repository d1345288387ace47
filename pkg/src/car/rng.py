"""Seeded 64-bit xorshift* generator.

k-means++ seeding needs randomness that is bit-reproducible across platforms
and library versions, so the generator is implemented here instead of
delegating to numpy.  The variant is xorshift64* (shifts 12/25/27, multiplier
0x2545F4914F6CDD1D); its name is recorded in every clustering result.
"""

from __future__ import annotations

RNG_NAME = "xorshift64star"

_MASK64 = (1 << 64) - 1
_MULT = 0x2545F4914F6CDD1D
# splitmix64 constants, used only to spread the user seed over 64 bits
_SM_GAMMA = 0x9E3779B97F4A7C15


class Xorshift64Star:
    """xorshift64* stream seeded from an arbitrary Python int."""

    def __init__(self, seed: int):
        self.seed = seed
        # splitmix64 step guards against low-entropy seeds (0, 1, 2, ...)
        z = (seed & _MASK64) ^ _SM_GAMMA
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        self._state = (z ^ (z >> 31)) or _SM_GAMMA  # state must be nonzero

    def next_u64(self) -> int:
        x = self._state
        x ^= (x >> 12)
        x = (x ^ (x << 25)) & _MASK64
        x ^= (x >> 27)
        self._state = x
        return (x * _MULT) & _MASK64

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n <= 0:
            raise ValueError("n must be positive")
        return min(int(self.random() * n), n - 1)
