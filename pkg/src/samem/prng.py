"""SplitMix64, the fixed generator behind every seeded draw in this package."""

from __future__ import annotations

import math

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randbelow(self, n: int) -> int:
        if n < 1:
            raise ValueError("n must be >= 1")
        return self.next_u64() % n

    def gauss(self) -> float:
        """Standard normal via Box-Muller (one draw per two uniforms)."""
        u1 = 1.0 - self.random()  # (0, 1], keeps log finite
        u2 = self.random()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def gauss_vector(self, n: int) -> list[float]:
        return [self.gauss() for _ in range(n)]
