#!/usr/bin/env python3
"""Chunked worker pool on joblib threads"""

from typing import Callable, List, Optional, Sequence, TypeVar

import numpy as np
from joblib import Parallel, delayed

T = TypeVar("T")

# Fixed chunk length keeps every chunk's arithmetic identical for any worker count.
CHUNK = 64


def default_workers() -> int:
    from app.config import Config
    return Config.get_workers()


def map_chunks(fn: Callable[[np.ndarray], np.ndarray], data: np.ndarray,
               workers: Optional[int] = None, chunk: int = CHUNK) -> np.ndarray:
    """Apply fn to consecutive row chunks of data and concatenate the results"""
    n = data.shape[0]
    if n == 0:
        return fn(data)
    pieces = [data[s:s + chunk] for s in range(0, n, chunk)]
    results = run_tasks([lambda p=p: fn(p) for p in pieces], workers)
    return np.concatenate(results, axis=0)


def run_tasks(tasks: Sequence[Callable[[], T]], workers: Optional[int] = None) -> List[T]:
    workers = workers or default_workers()
    if workers == 1 or len(tasks) <= 1:
        return [t() for t in tasks]
    return Parallel(n_jobs=workers, prefer="threads")(delayed(t)() for t in tasks)
