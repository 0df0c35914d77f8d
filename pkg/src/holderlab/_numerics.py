"""Deterministic reductions and scheduling-independent parallel maps."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")


def tree_sum(values: np.ndarray, axis: int = 0) -> np.ndarray:
    """Sum along ``axis`` with a fixed-shape pairwise tree.

    The association order depends only on the length of the axis, so the
    result does not depend on how the inputs were produced or chunked.
    """
    a = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    if a.shape[0] == 0:
        return np.zeros(a.shape[1:])
    while a.shape[0] > 1:
        n = a.shape[0]
        half = n // 2
        paired = a[0 : 2 * half : 2] + a[1 : 2 * half : 2]
        if n % 2:
            paired = np.concatenate([paired, a[-1:]], axis=0)
        a = paired
    return a[0]


def tree_mean(values: np.ndarray, axis: int = 0) -> np.ndarray:
    a = np.asarray(values, dtype=float)
    return tree_sum(a, axis) / a.shape[axis]


def resolve_threads(threads: int | None) -> int:
    """0 or None means auto: ``HOLDERLAB_THREADS`` if set, else the CPU count."""
    if threads is None or threads == 0:
        env = os.environ.get("HOLDERLAB_THREADS")
        if env:
            threads = int(env)
        if not threads:
            threads = os.cpu_count() or 1
    return max(1, int(threads))


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> list[R]:
    """``list(map(fn, items))``, optionally on a thread pool; order is preserved."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def chunk_ranges(total: int, chunk: int) -> Sequence[tuple[int, int]]:
    return [(s, min(s + chunk, total)) for s in range(0, total, chunk)]
