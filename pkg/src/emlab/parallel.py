"""Fixed-batch work distribution.

Paths are cut into batches whose boundaries depend only on the path count
and the batch size.  Workers compute whole batches and the caller reduces
the per-batch results in batch order, so the worker count affects wall-clock
time only.
"""
from __future__ import annotations

import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor

__all__ = ["batches", "map_batches"]


def batches(count: int, batch_size: int) -> list[range]:
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    return [range(i, min(i + batch_size, count)) for i in range(0, count, batch_size)]


def map_batches(func, tasks: list, workers: int = 1) -> list:
    """``[func(t) for t in tasks]``, optionally across processes, order preserved."""
    if workers <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else None
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        return list(pool.map(func, tasks))
