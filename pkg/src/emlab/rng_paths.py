"""Reproducible Brownian increments on a dyadic grid.

Every path is generated by its own Philox stream keyed by the pair
``(experiment_seed, path_index)``.  The normal variates of a path are drawn
left to right, one time step (a ``d``-vector) after the other, so the
position in the stream is the step index.  A path therefore never depends on
which worker produced it or on which other paths were generated alongside.

Coarser grids are obtained by *restriction*: the level-``m`` path is the
finest prefix-sum path sampled every ``finest_n // m`` steps.  All levels of
one experiment thus share one Brownian path bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PathSeed",
    "BrownianTableau",
    "GridError",
    "generate_tableau",
    "generate_batch",
    "value_at",
    "aggregate",
    "restrict",
    "grid_index",
]

_U64 = 2**64


class GridError(ValueError):
    """Raised for invalid grid parameters or off-grid times."""


@dataclass(frozen=True)
class PathSeed:
    experiment_seed: int
    path_index: int

    def __post_init__(self):
        for name in ("experiment_seed", "path_index"):
            v = getattr(self, name)
            if not 0 <= int(v) < _U64:
                raise ValueError(f"{name} must fit in an unsigned 64-bit integer, got {v}")

    def generator(self) -> np.random.Generator:
        key = np.array([self.experiment_seed, self.path_index], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def check_grid(finest_n: int, T: float) -> int:
    """Validate ``(finest_n, T)`` and return the number of finest steps."""
    if int(finest_n) != finest_n or not _is_power_of_two(int(finest_n)):
        raise GridError(f"finest_n must be a power of two, got {finest_n}")
    if not T > 0:
        raise GridError(f"horizon must be positive, got {T}")
    steps = finest_n * T
    if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
        raise GridError(f"finest_n * T = {steps} is not an integer")
    return int(round(steps))


@dataclass(frozen=True, eq=False)
class BrownianTableau:
    """Increments of one Brownian path at the finest grid.

    ``increments`` has shape ``(finest_n * T, dimension)``; ``path`` is the
    prefix-sum path of shape ``(finest_n * T + 1, dimension)`` with
    ``path[0] == 0``.
    """

    dimension: int
    finest_n: int
    horizon: float
    increments: np.ndarray
    seed: PathSeed | None = None

    def __post_init__(self):
        self.increments.setflags(write=False)

    @property
    def steps(self) -> int:
        return self.increments.shape[0]

    @property
    def path(self) -> np.ndarray:
        # cached lazily; the dataclass is frozen so go through __dict__
        p = self.__dict__.get("_path")
        if p is None:
            p = _prefix_sum(self.increments[:, None, :])[:, 0, :]
            p.setflags(write=False)
            self.__dict__["_path"] = p
        return p

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) / self.finest_n


def _prefix_sum(increments: np.ndarray) -> np.ndarray:
    """Left-to-right prefix sums along axis 0, with a leading zero row."""
    out = np.empty((increments.shape[0] + 1,) + increments.shape[1:])
    out[0] = 0.0
    np.cumsum(increments, axis=0, out=out[1:])
    return out


def _draw(seed: PathSeed, steps: int, d: int, finest_n: int) -> np.ndarray:
    z = seed.generator().standard_normal((steps, d))
    return z * np.sqrt(1.0 / finest_n)


def generate_tableau(seed: PathSeed, d: int, finest_n: int, T: float) -> BrownianTableau:
    """Generate the finest-grid increments of one path.

    Each coordinate increment is N(0, 1/finest_n).  Calling this twice with
    the same arguments returns identical arrays.
    """
    if int(d) != d or d < 1:
        raise GridError(f"dimension must be a positive integer, got {d}")
    steps = check_grid(finest_n, T)
    return BrownianTableau(int(d), int(finest_n), float(T), _draw(seed, steps, int(d), int(finest_n)), seed)


def generate_batch(experiment_seed: int, path_indices, d: int, finest_n: int, T: float) -> np.ndarray:
    """Prefix-sum paths of several seeds, stacked time-major.

    Returns an array of shape ``(steps + 1, len(path_indices), d)``.  Column
    ``j`` equals ``generate_tableau(PathSeed(experiment_seed, path_indices[j]), ...).path``
    bit for bit.
    """
    steps = check_grid(finest_n, T)
    path_indices = list(path_indices)
    inc = np.empty((steps, len(path_indices), d))
    for j, idx in enumerate(path_indices):
        inc[:, j, :] = _draw(PathSeed(experiment_seed, idx), steps, d, finest_n)
    return _prefix_sum(inc)


def grid_index(t: float, n: int, T: float | None = None) -> int:
    """Index ``k`` with ``t == k / n``; raises :class:`GridError` off-grid."""
    k = t * n
    kr = int(round(k))
    if abs(k - kr) > 1e-9 * max(1.0, abs(k)) or kr < 0:
        raise GridError(f"t = {t} is not on the grid of level {n}")
    if T is not None and kr > round(T * n):
        raise GridError(f"t = {t} lies beyond the horizon {T}")
    return kr


def value_at(tableau: BrownianTableau, t: float) -> np.ndarray:
    """W_t as the prefix sum of increments; ``t`` must lie on the finest grid."""
    k = grid_index(t, tableau.finest_n, tableau.horizon)
    return tableau.path[k].copy()


def _level_ratio(finest_n: int, m: int) -> int:
    if int(m) != m or m < 1 or finest_n % m:
        raise GridError(f"level {m} does not divide finest_n = {finest_n}")
    return finest_n // int(m)


def aggregate(tableau: BrownianTableau, m: int) -> np.ndarray:
    """Level-``m`` increments: block sums of ``finest_n // m`` consecutive increments.

    Each block is summed left to right.  The resulting coarse increments sum
    to the same Brownian path as the fine ones up to rounding; use
    :func:`restrict` when bitwise agreement with the finest path is needed.
    """
    r = _level_ratio(tableau.finest_n, m)
    blocks = tableau.increments.reshape(-1, r, tableau.dimension)
    out = blocks[:, 0, :].copy()
    for i in range(1, r):
        out += blocks[:, i, :]
    return out


def restrict(tableau: BrownianTableau, m: int) -> np.ndarray:
    """Level-``m`` path ``W_{k/m}``, ``k = 0..m*T``, exactly as on the finest grid."""
    r = _level_ratio(tableau.finest_n, m)
    return tableau.path[::r].copy()
