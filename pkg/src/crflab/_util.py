"""Small shared helpers: worker pool sizing and ordered parallel map."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count() -> int:
    """Worker cap from CRFLAB_THREADS; defaults to 1 (sequential)."""
    try:
        return max(1, int(os.environ.get("CRFLAB_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Ordered map over items, threaded when CRFLAB_THREADS > 1."""
    items = list(items)
    n = worker_count()
    if n == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
