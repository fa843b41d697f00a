"""
Sweep Worker

Runs independent simulation tasks (sweep points, collocation nodes) on a
thread pool. Results come back in submission order whatever the completion
order, so sweeps stay reproducible for any thread count.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, Sequence, TypeVar

from app.core.config import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")


def run_tasks(
    tasks: Sequence[Callable[[], T]],
    threads: Optional[int] = None,
    labels: Optional[Sequence[str]] = None,
    on_result: Optional[Callable[[int, T], None]] = None,
) -> list[T]:
    """Run every task and return results in task order; the first failure propagates.

    ``on_result(index, result)`` is called in task order for every result that
    precedes the first failure.
    """
    threads = max(1, threads or settings.THREADS)
    labels = list(labels) if labels is not None else [f"task {n}" for n in range(len(tasks))]

    def collect(index: int, result: T) -> T:
        logger.info("✅ %s", labels[index])
        if on_result is not None:
            on_result(index, result)
        return result

    if threads == 1 or len(tasks) <= 1:
        results = []
        for index, (label, task) in enumerate(zip(labels, tasks)):
            logger.info("🔄 %s", label)
            try:
                results.append(collect(index, task()))
            except Exception as e:
                logger.error("❌ %s: %s", label, e)
                raise
        return results

    logger.info("🚀 dispatching %d tasks on %d threads", len(tasks), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = []
        for label, task in zip(labels, tasks):
            logger.info("🔄 %s", label)
            futures.append(pool.submit(task))
        results = []
        for index, future in enumerate(futures):
            try:
                results.append(collect(index, future.result()))
            except Exception as e:
                logger.error("❌ %s: %s", labels[index], e)
                for pending in futures[index + 1 :]:
                    pending.cancel()
                raise
        return results
