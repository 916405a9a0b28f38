"""Seeded random streams, one per consumer.

Each consumer (workload generator, ECMP salts, ...) gets its own stream
derived from the master seed by a fixed label, so adding a consumer never
perturbs the draws seen by the others.  Streams are built on the stdlib
Mersenne Twister seeded through SHA-256, which is stable across platforms
and Python versions.
"""

from __future__ import annotations

import hashlib
import random


class Stream:
    """A labeled, reproducible stream of variates."""

    def __init__(self, master_seed: int, label: str):
        digest = hashlib.sha256(f"{master_seed}:{label}".encode()).digest()
        self._rand = random.Random(int.from_bytes(digest[:16], "little"))
        self.master_seed = master_seed
        self.label = label

    def uniform(self, lo: float, hi: float) -> float:
        """Uniform draw in [lo, hi); degenerate lo == hi returns lo."""
        if lo > hi:
            raise ValueError(f"uniform bounds reversed: lo={lo} > hi={hi}")
        return lo + (hi - lo) * self._rand.random()

    def exponential(self, mean: float) -> float:
        """Exponential draw with the given mean (> 0)."""
        if mean <= 0:
            raise ValueError(f"exponential mean must be > 0, got {mean}")
        return self._rand.expovariate(1.0 / mean)

    def randint(self, lo: int, hi: int) -> int:
        """Integer uniform on [lo, hi] inclusive."""
        return self._rand.randint(lo, hi)

    def rand64(self) -> int:
        """A 64-bit word, for hash salting."""
        return self._rand.getrandbits(64)

    def choice_excluding(self, n: int, exclude: int) -> int:
        """Uniform index in [0, n) that is not ``exclude``."""
        if n < 2:
            raise ValueError("need at least two choices")
        k = self._rand.randrange(n - 1)
        return k if k < exclude else k + 1


def draw_uniform(stream: Stream, lo: float, hi: float) -> float:
    return stream.uniform(lo, hi)


def draw_exponential(stream: Stream, mean: float) -> float:
    return stream.exponential(mean)
