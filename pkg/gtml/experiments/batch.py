"""
Replications run as threads gathered in batches of `jobs`; results keep submission order.
"""
import asyncio
import logging
from typing import Callable, List, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

logger = logging.getLogger(__name__)


async def _gather_batches(fn: Callable[[T], R], items: Sequence[T], jobs: int) -> List[R]:
    results: List[R] = []
    for i in range(0, len(items), jobs):
        batch = items[i:i + jobs]
        tasks = [asyncio.to_thread(fn, item) for item in batch]
        batch_results = await asyncio.gather(*tasks, return_exceptions=True)
        for result in batch_results:
            if isinstance(result, BaseException):
                raise result
            results.append(result)
        logger.debug("processed %s/%s replications", min(i + jobs, len(items)), len(items))
    return results


def run_batched(fn: Callable[[T], R], items: Sequence[T], jobs: int = 1) -> List[R]:
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    items = list(items)
    if jobs == 1:
        return [fn(item) for item in items]
    return asyncio.run(_gather_batches(fn, items, jobs))
