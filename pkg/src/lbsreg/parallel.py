"""Seed splitting and order-preserving task mapping."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")


def replica_rng(master_seed: int, index: int, *extra: int) -> np.random.Generator:
    """Independent stream for task ``index`` under ``master_seed``."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index), *map(int, extra)))
    return np.random.default_rng(ss)


def map_tasks(fn: Callable[[T], R], tasks: Iterable[T], threads: int = 1) -> list[R]:
    """``[fn(t) for t in tasks]``, optionally in worker processes.

    Results come back in task order so aggregation is independent of scheduling.
    """
    tasks = list(tasks)
    if threads <= 1 or len(tasks) < 2:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * threads))))
