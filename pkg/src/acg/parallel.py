"""Worker-count control for embarrassingly parallel loops.

``ACG_THREADS`` caps the number of worker threads; unset or ``0`` runs
sequentially. Results always come back in input order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count() -> int:
    raw = os.environ.get("ACG_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"ACG_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError("ACG_THREADS must be >= 0")
    return n


def map_ordered(fn, items):
    items = list(items)
    n = worker_count()
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))
