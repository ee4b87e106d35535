"""Seeded replicate splitting.

Work is cut into ``workers`` shards, each with its own generator spawned from
one SeedSequence, and results are combined in shard order.  Output therefore
depends on (seed, workers) only, not on scheduling.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable

import numpy as np


def spawn_generators(seed: int, count: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def shard_sizes(total: int, workers: int) -> list[int]:
    base, extra = divmod(total, workers)
    return [base + (i < extra) for i in range(workers)]


def _call(args):
    fn, child, size, kwargs = args
    return fn(np.random.default_rng(child), size, **kwargs)


def run_sharded(fn: Callable, total: int, seed: int, workers: int = 1, **kwargs) -> list:
    """Call ``fn(rng, size, **kwargs)`` once per shard and return results in shard order.

    With ``workers == 1`` everything runs in-process.  ``fn`` must be
    picklable (a module-level function) when ``workers > 1``.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    children = np.random.SeedSequence(seed).spawn(workers)
    jobs = [(fn, c, s, kwargs) for c, s in zip(children, shard_sizes(total, workers)) if s > 0]
    if workers == 1:
        return [_call(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_call, jobs))


def concat_sharded(fn: Callable, total: int, seed: int, workers: int = 1, **kwargs) -> np.ndarray:
    return np.concatenate(run_sharded(fn, total, seed, workers, **kwargs), axis=0)
