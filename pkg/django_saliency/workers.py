from __future__ import annotations

import logging
import os
from multiprocessing import Pool
from typing import Callable, Iterable, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def resolve_jobs(jobs: int | None) -> int:
    if jobs is None or jobs <= 0:
        return os.cpu_count() or 1
    return jobs


def parallel_map(func: Callable[[T], R], items: Iterable[T], jobs: int | None = 1) -> list[R]:
    """``map`` over a process pool; results keep the order of ``items``."""
    items = list(items)
    jobs = min(resolve_jobs(jobs), len(items))
    if jobs <= 1:
        return [func(item) for item in items]
    logger.debug("Running %d tasks on %d worker processes", len(items), jobs)
    with Pool(processes=jobs) as pool:
        return pool.map(func, items)
