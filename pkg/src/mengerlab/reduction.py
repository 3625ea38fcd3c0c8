"""Deterministic parallel reductions and seed derivation.

Work is split into a fixed list of items (index blocks, cells, streams); each
item is evaluated independently, possibly on a thread pool, and the partial
results are merged in item order.  The merge order never depends on the
number of threads, so results are bit-identical for any ``threads`` value.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, Sequence, TypeVar

import numpy as np

from .errors import InputError

THREADS_ENV = "MENGERLAB_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(threads: Optional[int] = None) -> int:
    """Worker count: explicit value, else ``$MENGERLAB_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get(THREADS_ENV, "").strip()
        if not env:
            return 1
        try:
            threads = int(env)
        except ValueError as exc:
            raise InputError(f"{THREADS_ENV} must be an integer, got {env!r}") from exc
    if threads < 1:
        raise InputError("thread count must be at least 1")
    return min(int(threads), os.cpu_count() or 1)


def ordered_map(fn: Callable[[T], R], items: Sequence[T], threads: Optional[int] = None) -> List[R]:
    """``[fn(x) for x in items]``, evaluated on up to ``threads`` workers."""
    items = list(items)
    workers = min(resolve_threads(threads), max(len(items), 1))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def ordered_sum(parts: Iterable[float]) -> float:
    """Correctly rounded sum of the partials, independent of how they were produced."""
    return math.fsum(float(v) for v in parts)


def blocks(n: int, size: int) -> List[range]:
    """Contiguous index ranges of length ``size`` covering ``range(n)``."""
    return [range(s, min(s + size, n)) for s in range(0, n, size)]


def item_rng(seed: int, *keys: int) -> np.random.Generator:
    """Generator for work item ``keys`` under master ``seed``.

    ``SeedSequence`` hashes the whole key tuple, so nearby keys give
    independent streams and the stream for a cell does not depend on which
    other cells are evaluated.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed)] + [int(k) for k in keys]))
