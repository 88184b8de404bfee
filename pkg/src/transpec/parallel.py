"""Deterministic RNG substreams and an order-preserving process map.

Every random quantity in the package flows from one master seed through
counter-keyed substreams, so results do not depend on scheduling or on the
worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List

import numpy as np

__all__ = ["substream", "derived_seed", "parallel_map", "default_workers"]


def substream(seed: int, *key: int) -> np.random.Generator:
    """A generator keyed by (seed, *key); identical inputs give identical streams."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key)))


def derived_seed(seed: int, *key: int) -> int:
    """A 64-bit integer seed derived deterministically from (seed, *key)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def default_workers() -> int:
    env = os.environ.get("TRANSPEC_WORKERS", "").strip()
    if env:
        return max(1, int(env))
    return 1


def parallel_map(fn: Callable, tasks: Iterable, workers: int = 1) -> List:
    """Map preserving task order; a process pool when workers > 1."""
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunk = max(1, len(tasks) // (8 * workers))
        return list(pool.map(fn, tasks, chunksize=chunk))
