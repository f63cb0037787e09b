"""Mergeable (count, mean, M2) summaries for streaming mean/variance.

Summaries form a commutative monoid under :meth:`Moments.merge` (the
pairwise update of Chan, Golub and LeVeque).  Floating-point merging is not
associative, so :func:`tree_reduce` always combines a list of summaries with
the same balanced binary tree; the result depends only on the list, never on
how the underlying work was scheduled.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Moments", "tree_reduce"]


@dataclass(frozen=True, eq=False)
class Moments:
    count: int
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def empty(cls, shape=()) -> "Moments":
        return cls(0, np.zeros(shape), np.zeros(shape))

    @classmethod
    def from_samples(cls, x, axis: int = 0) -> "Moments":
        """Two-pass summary of ``x`` along ``axis``."""
        x = np.asarray(x, dtype=float)
        n = x.shape[axis]
        if n == 0:
            return cls.empty(np.delete(x.shape, axis))
        mean = np.mean(x, axis=axis)
        dev = x - np.expand_dims(mean, axis)
        return cls(int(n), mean, np.sum(dev * dev, axis=axis))

    def push(self, x) -> "Moments":
        """Welford update with a single observation."""
        x = np.asarray(x, dtype=float)
        n = self.count + 1
        delta = x - self.mean
        mean = self.mean + delta / n
        return Moments(n, mean, self.m2 + delta * (x - mean))

    def merge(self, other: "Moments") -> "Moments":
        if other.count == 0:
            return self
        if self.count == 0:
            return other
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / n)
        m2 = self.m2 + other.m2 + delta * delta * (self.count * other.count / n)
        return Moments(n, mean, m2)

    @property
    def variance(self) -> np.ndarray:
        """Unbiased sample variance (NaN for fewer than two samples)."""
        if self.count < 2:
            return np.full_like(self.mean, np.nan)
        return self.m2 / (self.count - 1)

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(self.variance / self.count)

    def ci_half_width(self, z: float = 1.959963984540054) -> np.ndarray:
        """Half-width of the normal-approximation confidence interval (95% by default)."""
        return z * self.stderr


def tree_reduce(parts: list[Moments]) -> Moments:
    """Merge summaries with a fixed balanced binary tree over the list order."""
    if not parts:
        raise ValueError("nothing to reduce")
    level = list(parts)
    while len(level) > 1:
        nxt = [level[i].merge(level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]
