import os
from concurrent.futures import ThreadPoolExecutor


def max_workers():
    """Thread cap from ``SPINRES_THREADS`` (default: CPU count, at most 8)."""
    env = os.environ.get("SPINRES_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(8, os.cpu_count() or 1)


def ordered_map(func, items):
    """``map`` over ``items`` with bounded threads; results keep input order."""
    items = list(items)
    n = max_workers()
    if n == 1 or len(items) < 2:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(func, items))
