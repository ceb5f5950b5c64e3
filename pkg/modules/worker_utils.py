"""
Worker Utilities

Worker count selection and parallel execution of independent seeded missions.
"""
import logging
import os
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, Dict, List, Optional, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")


def choose_worker_count(
    n_tasks: int,
    requested: Optional[int] = None,
    min_workers: int = 1,
    max_workers_cap: int = 8,
    debug: bool = False,
) -> int:
    """
    Pick the number of worker threads for a batch of seeds.

    Args:
        n_tasks: Number of independent missions in the batch
        requested: Explicit worker count from the command line, if any
        min_workers: Minimum allowed workers (default: 1)
        max_workers_cap: Upper bound when no explicit count is given (default: 8)
        debug: Log the decision

    Returns:
        int: ``requested`` clamped to [min_workers, n_tasks] when given, otherwise
        the CPU count clamped to [min_workers, min(max_workers_cap, n_tasks)]

    Example:
        >>> choose_worker_count(3, requested=10)
        3
    """
    if n_tasks < 1:
        return min_workers

    if requested is not None:
        if requested < 1:
            raise ValueError(f"Worker count must be >= 1, got {requested}")
        workers = max(min_workers, min(requested, n_tasks))
    else:
        # Small batches don't benefit from many threads
        workers = max(min_workers, min(os.cpu_count() or 1, max_workers_cap, n_tasks))

    if debug:
        logger.info(f"[WORKERS] tasks={n_tasks}, requested={requested}, workers={workers}")
    return int(workers)


def run_seeds(
    seeds: Sequence[int],
    task: Callable[[int], T],
    workers: Optional[int] = None,
) -> List[T]:
    """
    Run ``task(seed)`` for every seed, in parallel when more than one worker is used.

    Results are returned in seed order regardless of completion order. The
    first failing seed's exception is re-raised after the pool shuts down.
    """
    seeds = list(seeds)
    max_workers = choose_worker_count(len(seeds), workers)

    if max_workers <= 1 or len(seeds) <= 1:
        return [task(seed) for seed in seeds]

    logger.info(f"[WORKERS] Running {len(seeds)} seed(s) on {max_workers} worker(s)")
    results: Dict[int, T] = {}
    errors: Dict[int, BaseException] = {}

    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = {executor.submit(task, seed): i for i, seed in enumerate(seeds)}
        for future in as_completed(futures):
            i = futures[future]
            try:
                results[i] = future.result()
            except Exception as exc:
                logger.error(f"[WORKERS] ✗ Seed {seeds[i]} failed: {exc}")
                errors[i] = exc

    if errors:
        raise errors[min(errors)]
    return [results[i] for i in range(len(seeds))]
