from collections.abc import Callable, Sequence
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from typing import Any, TypeVar

from common.checks import available_workers
from common.logger import get_logger

logger = get_logger(__name__)

THREADS_ENV = "ROUGHSK_THREADS"

J = TypeVar("J")
R = TypeVar("R")


def resolve_workers(n_jobs: int, threads: int | None = None) -> int:
    """Worker count: explicit `threads`, else cores capped by ROUGHSK_THREADS; never more than jobs."""
    workers = threads if threads and threads > 0 else available_workers(THREADS_ENV)
    return max(1, min(workers, n_jobs))


def run_jobs(
    worker: Callable[[J], R], jobs: Sequence[J], workers: int, label: str = "jobs"
) -> list[R]:
    """
    Run `worker` over `jobs` and return the results in job order.

    At most 2 * workers jobs are in flight. The first failing job cancels the
    ones still queued and its exception is re-raised. A single worker runs
    the jobs inline.
    """
    results: list[Any] = [None] * len(jobs)
    if workers <= 1 or len(jobs) <= 1:
        for index, job in enumerate(jobs):
            results[index] = worker(job)
            logger.debug(f"{label}: finished {index + 1}/{len(jobs)}")
        return results

    logger.debug(f"{label}: dispatching {len(jobs)} job(s) to {workers} worker(s)")
    queue = iter(enumerate(jobs))
    done_count = 0

    with ProcessPoolExecutor(max_workers=workers) as executor:
        pending = {}

        def submit() -> None:
            item = next(queue, None)
            if item is not None:
                index, job = item
                pending[executor.submit(worker, job)] = index

        for _ in range(workers * 2):
            submit()

        while pending:
            done_set, _ = wait(list(pending), return_when=FIRST_COMPLETED)
            for future in done_set:
                index = pending.pop(future)
                try:
                    results[index] = future.result()
                except Exception as e:
                    logger.error(f"{label}: job {index} failed: {e}")
                    for other in pending:
                        other.cancel()
                    executor.shutdown(wait=False, cancel_futures=True)
                    raise
                done_count += 1
                logger.debug(f"{label}: finished {done_count}/{len(jobs)}")
                submit()

    return results
