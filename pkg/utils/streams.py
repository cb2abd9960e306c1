# utils/streams.py
"""
Seeded random streams and an order-preserving worker pool.

Draw i of a run with seed s always comes from block i // block_size, whose
generator is keyed by (s, block, stream). Results are gathered in block order,
so the output does not depend on how many workers ran.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, Tuple, TypeVar

import numpy as np

from config.settings import Config
from polytope.errors import DomainError

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')

# Stream ids within a block
CHOICE_STREAM = 0
PLACEMENT_STREAM = 1


def check_seed(seed: int) -> int:
    if seed is None or int(seed) < 0 or int(seed) >= 2**64:
        raise DomainError(f"seed must be an integer in [0, 2^64), got {seed!r}")
    return int(seed)


def block_rng(seed: int, block: int, stream: int = CHOICE_STREAM) -> np.random.Generator:
    """Generator keyed by (seed, block, stream)"""
    sequence = np.random.SeedSequence(entropy=check_seed(seed), spawn_key=(block, stream))
    return np.random.default_rng(sequence)


def blocks(n: int, block_size: Optional[int] = None) -> List[Tuple[int, int, int]]:
    """(block index, start, stop) covering 0..n"""
    size = block_size or Config.BLOCK_SIZE
    return [(b, start, min(start + size, n)) for b, start in enumerate(range(0, n, size))]


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> List[R]:
    """map() over a thread pool, results in input order"""
    items = list(items)
    workers = min(threads or Config.threads(), max(len(items), 1))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
