"""Batch-axis data parallelism for forward kernels."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

_num_threads = 1
_pool: ThreadPoolExecutor | None = None


def set_num_threads(n: int) -> None:
    global _num_threads, _pool
    if n < 1:
        raise ValueError("thread count must be >= 1")
    if n != _num_threads and _pool is not None:
        _pool.shutdown(wait=True)
        _pool = None
    _num_threads = int(n)


def get_num_threads() -> int:
    return _num_threads


def available_cpus() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def _get_pool() -> ThreadPoolExecutor:
    global _pool
    if _pool is None:
        _pool = ThreadPoolExecutor(max_workers=_num_threads, thread_name_prefix="diffcv")
    return _pool


def map_batch(fn: Callable[..., np.ndarray], *arrays: np.ndarray) -> np.ndarray:
    """Apply ``fn`` to contiguous chunks along axis 0 and concatenate.

    ``fn`` must treat batch items independently, which makes the chunked result
    identical to a single call.
    """
    n = arrays[0].shape[0]
    workers = min(_num_threads, n)
    if workers <= 1:
        return fn(*arrays)
    bounds = np.linspace(0, n, workers + 1).astype(int)
    chunks = [tuple(a[lo:hi] for a in arrays) for lo, hi in zip(bounds[:-1], bounds[1:])]
    results = list(_get_pool().map(lambda args: fn(*args), chunks))
    return np.concatenate(results, axis=0)
