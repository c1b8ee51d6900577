"""Mergeable sample statistics and seeded sub-streams for Monte Carlo runs."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Z95 = 1.959963984540054


def substream(seed: int, replica: int) -> np.random.Generator:
    """Counter-based (Philox) generator keyed by ``(seed, replica)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(replica)])))


@dataclass(frozen=True)
class RunningStats:
    """Count, mean and sum of squared deviations (Chan et al. merge)."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @classmethod
    def of(cls, samples) -> "RunningStats":
        x = np.asarray(samples, dtype=float)
        if x.size == 0:
            return cls()
        mean = math.fsum(x.tolist()) / x.size
        return cls(int(x.size), mean, float(np.sum((x - mean) ** 2)))

    def merge(self, other: "RunningStats") -> "RunningStats":
        if other.count == 0:
            return self
        if self.count == 0:
            return other
        n = self.count + other.count
        d = other.mean - self.mean
        mean = self.mean + d * other.count / n
        m2 = self.m2 + other.m2 + d * d * self.count * other.count / n
        return RunningStats(n, mean, m2)

    @property
    def std(self) -> float:
        if self.count < 2:
            return math.inf
        return math.sqrt(self.m2 / (self.count - 1))

    @property
    def stderr(self) -> float:
        return self.std / math.sqrt(self.count) if self.count else math.inf

    @property
    def half_width(self) -> float:
        """95% normal-approximation confidence half-width."""
        return Z95 * self.stderr
