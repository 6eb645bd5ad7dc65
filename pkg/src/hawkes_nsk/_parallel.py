"""Ordered thread fan-out shared by the study and ergodicity drivers."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

from .errors import InvalidParameterError

THREADS_ENV = "HAWKES_NSK_THREADS"


def resolve_threads(threads: int | None = None) -> int:
    """``threads`` if given, else ``$HAWKES_NSK_THREADS``, else the available CPU count."""
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise InvalidParameterError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    if threads is None:
        threads = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)
    if threads < 1:
        raise InvalidParameterError("thread count must be positive")
    return int(threads)


def ordered_map(fn, items, threads: int | None = None) -> list:
    """``[fn(x) for x in items]``, possibly on worker threads; the result order is the input order."""
    items = list(items)
    threads = resolve_threads(threads)
    if threads == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))
