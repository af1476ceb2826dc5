"""Replica fan-out over a thread pool with results in replica order."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

T = TypeVar("T")

__all__ = ["map_replicas"]


def map_replicas(fn: Callable[[int], T], n: int, threads: int = 1) -> list[T]:
    """``[fn(0), ..., fn(n-1)]``, evaluated on up to ``threads`` workers.

    Each replica must draw from its own stream, so the result does not
    depend on the thread count or scheduling.
    """
    if threads < 1:
        raise ValueError("threads must be >= 1")
    if threads == 1 or n <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n)))
