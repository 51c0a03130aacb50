"""SplitMix64 streams.

Every random draw in the package comes from here so that a run is fully
determined by its 64-bit seed. The generator is the standard SplitMix64
(state increment 0x9E3779B97F4A7C15, finalizer constants 0xBF58476D1CE4E5B9
and 0x94D049BB133111EB, shifts 30/27/31). ``split(i)`` seeds child stream i
with ``mix(seed + (i + 1) * 0x9E3779B97F4A7C15)`` where ``mix`` is the finalizer,
so child streams do not depend on how many values the parent has produced.
"""

from __future__ import annotations

import math

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def mix(z: int) -> int:
    z &= MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


class SplitMix64:
    def __init__(self, seed: int):
        self.seed = seed & MASK
        self.state = self.seed

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK
        return mix(self.state)

    def split(self, i: int) -> "SplitMix64":
        return SplitMix64(mix(self.seed + (i + 1) * GOLDEN))

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection sampling."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            v = self.next_u64()
            if v < limit:
                return v % n

    def choice(self, seq):
        return seq[self.below(len(seq))]

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def draw(self, dist) -> str:
        """Exact draw from a Dist: one uniform integer below the lcm of the mass denominators."""
        scale = 1
        for p in dist.mass.values():
            scale = math.lcm(scale, p.denominator)
        r = self.below(scale)
        for x, p in dist.mass.items():
            r -= p.numerator * (scale // p.denominator)
            if r < 0:
                return x
        raise AssertionError("masses do not sum to 1")
