"""
Order-preserving process-pool map shared by the nest builder, the fault
enumerator and the simulator.
"""
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Any, Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")

# Large read-only state installed once per worker process
_shared: Any = None


def _install(shared: Any) -> None:
    global _shared
    _shared = shared


def _call(fn: Callable[[Any, T], R], item: T) -> R:
    return fn(_shared, item)


def parallel_map(fn: Callable[[Any, T], R], items: Iterable[T], workers: int = 1, shared: Any = None) -> list[R]:
    """
    Apply fn(shared, item) to every item, returning results in input order.

    Args:
        fn: Module-level function (it is pickled for the workers)
        items: Work items
        workers: Process count; 1 runs in-process
        shared: Read-only state sent once to each worker

    Returns:
        list: Results in the order of items
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(shared, item) for item in items]
    chunksize = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers, initializer=_install, initargs=(shared,)) as pool:
        return list(pool.map(partial(_call, fn), items, chunksize=chunksize))
