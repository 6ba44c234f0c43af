"""Chunked evaluation honouring the CML_THREADS cap.

Work is split into fixed index ranges and results come back in range
order, so the merged output never depends on the thread count.
"""

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count():
    raw = os.environ.get("CML_THREADS", "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"CML_THREADS must be an integer, got {raw!r}") from None
        if n < 1:
            raise ValueError("CML_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def chunks(n, size):
    return [(start, min(start + size, n)) for start in range(0, n, size)]


def map_ranges(fn, n, size=1 << 16):
    """Apply ``fn(start, stop)`` over consecutive ranges covering ``range(n)``."""
    ranges = chunks(n, size)
    workers = min(thread_count(), len(ranges))
    if workers <= 1:
        return [fn(a, b) for a, b in ranges]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda r: fn(*r), ranges))
