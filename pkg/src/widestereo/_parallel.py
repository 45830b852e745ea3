"""Deterministic chunked parallelism helpers.

Work is split into fixed-size chunks whose boundaries do not depend on the
thread count, results are collected in chunk order, and any reduction
happens sequentially in the caller. Outputs are therefore bit-identical for
any number of threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, TypeVar

T = TypeVar("T")

THREADS_ENV_VAR = "WIDESTEREO_THREADS"


def resolve_thread_count(requested: Optional[int] = None) -> int:
    """Explicit request wins, then the environment variable, then 1."""
    if requested is not None:
        if requested < 1:
            raise ValueError("thread count must be at least 1")
        return requested
    env = os.environ.get(THREADS_ENV_VAR)
    if env:
        try:
            value = int(env)
        except ValueError as exc:
            raise ValueError(f"{THREADS_ENV_VAR} must be an integer, got {env!r}") from exc
        if value < 1:
            raise ValueError(f"{THREADS_ENV_VAR} must be at least 1, got {value}")
        return value
    return 1


def chunk_bounds(n_items: int, chunk_size: int) -> List[tuple[int, int]]:
    if chunk_size < 1:
        raise ValueError("chunk size must be at least 1")
    return [(start, min(start + chunk_size, n_items))
            for start in range(0, n_items, chunk_size)]


def run_chunked(n_items: int, chunk_size: int, fn: Callable[[int, int], T],
                threads: Optional[int] = None) -> List[T]:
    """Apply fn(start, stop) to every chunk; results come back in chunk order."""
    bounds = chunk_bounds(n_items, chunk_size)
    n_threads = resolve_thread_count(threads)
    if n_threads == 1 or len(bounds) <= 1:
        return [fn(start, stop) for start, stop in bounds]
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        futures = [pool.submit(fn, start, stop) for start, stop in bounds]
        return [f.result() for f in futures]
