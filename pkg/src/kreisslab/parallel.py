"""Deterministic map helper for embarrassingly parallel grid sweeps.

Results are always collected in input order, so a run with threads > 1
reduces to exactly the same output as a sequential run.  The thread count
is capped by the KREISSLAB_THREADS environment variable.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

__all__ = ["thread_cap", "ordered_map"]


def thread_cap(requested: int | None = None) -> int:
    cap = os.environ.get("KREISSLAB_THREADS")
    try:
        cap = int(cap) if cap is not None else None
    except ValueError:
        cap = None
    if cap is not None and cap < 1:
        cap = 1
    n = requested if requested is not None else 1
    if cap is not None:
        n = min(n, cap)
    return max(1, n)


def ordered_map(fn, items, threads: int = 1):
    """map(fn, items) with optional threading; output order fixed."""
    threads = thread_cap(threads)
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
