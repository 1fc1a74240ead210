from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

from . import __log as _l

_T = TypeVar("_T")
_R = TypeVar("_R")


def mapOrdered(
    function: Callable[[_T], _R], items: Iterable[_T], threads: int = 1
) -> list[_R]:
    """Apply `function` to every item, results in input order.

    Work units must be independent; with threads > 1 they run on a thread
    pool, otherwise inline. Exceptions propagate from the first failing item
    in input order.
    """
    work = list(items)
    if threads <= 1 or len(work) <= 1:
        return [function(item) for item in work]
    workers = min(threads, len(work))
    name = getattr(function, "__name__", "task")
    _l.debug(f"running {len(work)} units of {name} on {workers} threads")
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="idrkit") as pool:
        futures = [pool.submit(function, item) for item in work]
        return [f.result() for f in futures]
