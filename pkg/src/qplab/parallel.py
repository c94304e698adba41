"""Deterministic task pool: fixed task boundaries, results folded in index order."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence


def chunks(n: int, size: int) -> list[range]:
    """Split range(n) into consecutive pieces of ``size`` (the last may be shorter).

    Boundaries depend on n and size only, never on the worker count, so every
    task computes the same floating-point operations at any thread count.
    """
    if size < 1:
        raise ValueError("chunk size must be positive")
    return [range(i, min(i + size, n)) for i in range(0, n, size)]


def run_tasks(fn: Callable, tasks: Sequence, threads: int = 1) -> list:
    """[fn(t) for t in tasks], evaluated on up to ``threads`` workers."""
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))
