"""Seed derivation and deterministic fan-out of trial blocks over processes."""
from __future__ import annotations

import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence

import numpy as np


def _key(experiment: str) -> int:
    return zlib.crc32(experiment.encode("utf-8"))


def trial_rng(seed: int, experiment: str, grid_index: int, trial: int) -> np.random.Generator:
    """Philox stream for one trial, a pure function of its coordinates."""
    ss = np.random.SeedSequence(seed, spawn_key=(_key(experiment), grid_index, trial))
    return np.random.Generator(np.random.Philox(ss))


def block_rng(seed: int, experiment: str, grid_index: int, block: int) -> np.random.Generator:
    """Stream for a fixed-size block of vectorized trials (disjoint from trial streams)."""
    ss = np.random.SeedSequence(
        seed, spawn_key=(_key(experiment), grid_index, 1 << 32, block)
    )
    return np.random.Generator(np.random.Philox(ss))


def blocks(trials: int, size: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + size, trials)) for lo in range(0, trials, size)]


def run_tasks(fn: Callable, tasks: Sequence[tuple], workers: int) -> list:
    """``[fn(*task) for task in tasks]``, optionally spread over processes.

    Results come back in task order whatever the worker count.
    """
    if workers <= 1 or len(tasks) <= 1:
        return [fn(*task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*tasks)))


def mean_se(values: Iterable[float]) -> tuple[float, float]:
    """Sample mean and ``std(ddof=1) / sqrt(n)`` (0 for a single value)."""
    x = np.asarray(list(values), dtype=float)
    if x.size == 0:
        return math.nan, math.nan
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return float(x.mean()), se


def binomial_se(p: float, trials: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / trials)
