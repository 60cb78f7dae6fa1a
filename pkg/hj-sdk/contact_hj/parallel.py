"""Worker-count state and chunked data-parallel map (single process)."""

from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

T = TypeVar("T")

# Process-wide worker count; set once by the CLI (--threads)
_threads: int = 1


def set_threads(n: int) -> None:
    """
    Set the number of worker threads used by data-parallel sections.

    Args:
        n: Worker count (values below 1 are treated as 1)
    """
    global _threads
    _threads = max(1, int(n))


def get_threads() -> int:
    """Current worker count."""
    return _threads


def chunk_bounds(n_items: int, n_chunks: int) -> list[tuple[int, int]]:
    """Split range(n_items) into at most n_chunks contiguous (start, stop) pairs."""
    n_chunks = max(1, min(n_chunks, n_items))
    edges = [round(k * n_items / n_chunks) for k in range(n_chunks + 1)]
    return [(edges[k], edges[k + 1]) for k in range(n_chunks) if edges[k + 1] > edges[k]]


def map_chunks(fn: Callable[[int, int], T], n_items: int) -> list[T]:
    """
    Run fn(start, stop) over contiguous chunks of range(n_items).

    Results come back in chunk order regardless of scheduling, and each call
    is expected to touch only its own slice, so outputs do not depend on the
    worker count.
    """
    bounds = chunk_bounds(n_items, _threads)
    if len(bounds) <= 1:
        return [fn(start, stop) for start, stop in bounds]
    with ThreadPoolExecutor(max_workers=len(bounds)) as pool:
        futures = [pool.submit(fn, start, stop) for start, stop in bounds]
        return [f.result() for f in futures]
