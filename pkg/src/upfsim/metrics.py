"""Latency statistics, allocation timing and confidence intervals."""

from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass
from decimal import Decimal
from typing import Callable, Mapping, Sequence

import numpy as np


@dataclass(frozen=True)
class SlotMetrics:
    slot_index: int
    algorithm: str
    k: int
    fraction: float
    p90_latency: int
    mean_latency: float
    exec_time: float
    total_ues: int


@dataclass(frozen=True)
class AggregateMetrics:
    algorithm: str
    fraction: float
    mean_of_p90: float
    ci95_halfwidth: float | None  # undefined for a single slot
    mean_exec_time: float
    slot_count: int


def _rank(p, total: int) -> int:
    if not 0 < p <= 100:
        raise ValueError("percentile must be in (0, 100]")
    return max(1, math.ceil(Decimal(str(p)) * total / 100))


def weighted_percentile(multiset: Mapping[int, int], p=90) -> int:
    """Nearest-rank percentile of a value -> weight multiset.

    Returns the smallest value whose cumulative weight reaches
    ``ceil(p/100 * total_weight)``.
    """
    items = sorted((v, w) for v, w in multiset.items() if w > 0)
    total = sum(w for _, w in items)
    if total < 1:
        raise ValueError("empty multiset")
    rank = _rank(p, total)
    acc = 0
    for value, weight in items:
        acc += weight
        if acc >= rank:
            return value
    return items[-1][0]


def weighted_mean(multiset: Mapping[int, int]) -> float:
    total = sum(multiset.values())
    if total < 1:
        raise ValueError("empty multiset")
    return sum(v * w for v, w in multiset.items()) / total


def percentile_from_arrays(values: np.ndarray, weights: np.ndarray, p=90) -> int:
    """Array form of :func:`weighted_percentile` for integer latencies."""
    total = int(weights.sum())
    if total < 1:
        raise ValueError("empty multiset")
    rank = _rank(p, total)
    by_value = np.bincount(values, weights=weights)
    return int(np.searchsorted(np.cumsum(by_value), rank - 0.5))


def measure(fn: Callable, *args, **kwargs):
    """Run ``fn`` once and return ``(result, elapsed_seconds)``."""
    start = time.perf_counter()
    result = fn(*args, **kwargs)
    return result, time.perf_counter() - start


def ci95(samples: Sequence[float]) -> tuple[float, float]:
    """Normal-approximation 95% interval: ``(mean, 1.96 * s / sqrt(n))``."""
    if len(samples) < 2:
        raise ValueError("need at least 2 samples")
    mean = statistics.fmean(samples)
    return mean, 1.96 * statistics.stdev(samples) / math.sqrt(len(samples))
