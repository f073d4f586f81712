"""Counter-based random streams for reproducible parallel sampling.

Samples are grouped into fixed-size blocks.  Block ``b`` of stream ``s``
under master seed ``m`` draws from Philox-4x64 with key ``m | (s << 64)``
and starting counter ``(0, 0, 0, b)``: the block index sits in the most
significant counter word, so blocks never overlap and results depend only on
``(m, s, b)``.  Worker count only changes which thread runs a block; the
merge is always in block order.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterator, TypeVar

import numpy as np

MASK64 = (1 << 64) - 1
DEFAULT_BLOCK_SIZE = 1000
THREADS_ENV = "CABLESOUP_THREADS"

T = TypeVar("T")


def block_rng(seed: int, block: int, stream: int = 0) -> np.random.Generator:
    key = (int(seed) & MASK64) | ((int(stream) & MASK64) << 64)
    counter = np.array([0, 0, 0, int(block) & MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def blocks(n_samples: int, block_size: int = DEFAULT_BLOCK_SIZE) -> list[tuple[int, int, int]]:
    """``(block index, start, stop)`` triples covering ``range(n_samples)``."""
    return [(b, s, min(s + block_size, n_samples)) for b, s in enumerate(range(0, n_samples, block_size))]


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return 1


def map_blocks(
    fn: Callable[[np.random.Generator, int, int, int], T],
    n_samples: int,
    seed: int,
    stream: int = 0,
    block_size: int = DEFAULT_BLOCK_SIZE,
    threads: int | None = None,
) -> list[T]:
    """Run ``fn(rng, block, start, stop)`` for every block; results in block order."""
    work = blocks(n_samples, block_size)

    def task(item):
        b, start, stop = item
        return fn(block_rng(seed, b, stream), b, start, stop)

    threads = threads or default_threads()
    if threads <= 1 or len(work) <= 1:
        return [task(w) for w in work]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(task, work))


def iter_blocks(n_samples: int, seed: int, stream: int = 0,
                block_size: int = DEFAULT_BLOCK_SIZE) -> Iterator[tuple[np.random.Generator, int, int]]:
    for b, start, stop in blocks(n_samples, block_size):
        yield block_rng(seed, b, stream), start, stop
