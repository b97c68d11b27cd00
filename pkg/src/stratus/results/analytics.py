"""Run analytics: repetition statistics, parallel efficiency, cost per run."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from ..catalog import InstanceType, estimate_cost
from ..errors import InsufficientSamples


class RunMetrics(NamedTuple):
    n: int
    mean_seconds: float
    std_seconds: float
    warmup_excluded: int


def aggregate_repetitions(samples: Sequence[float], warmup_count: int) -> RunMetrics:
    """Drop warm-up samples, then report sample mean and standard deviation.

    Standard deviation uses the n-1 denominator (sample estimator); a single
    remaining sample reports std 0.
    """
    if warmup_count < 0:
        raise ValueError("warmup_count must be >= 0")
    if len(samples) <= warmup_count:
        raise InsufficientSamples(
            f"{len(samples)} samples cannot cover warmup_count={warmup_count}")
    kept = list(samples[warmup_count:])
    mean = math.fsum(kept) / len(kept)
    std = statistics.stdev(kept) if len(kept) > 1 else 0.0
    return RunMetrics(n=len(kept), mean_seconds=mean, std_seconds=std,
                      warmup_excluded=warmup_count)


@dataclass(frozen=True)
class ScalingSeries:
    points: tuple[tuple[int, float], ...]  # (np, wall_hours), np ascending

    def __post_init__(self):
        pts = tuple(sorted(((int(n), float(t)) for n, t in self.points)))
        if not pts:
            raise ValueError("series must contain at least one point")
        nps = [n for n, _ in pts]
        if len(set(nps)) != len(nps):
            raise ValueError("np values must be unique")
        if any(n < 1 for n in nps):
            raise ValueError("np values must be positive")
        if any(t <= 0 for _, t in pts):
            raise ValueError("wall_hours must be positive")
        object.__setattr__(self, "points", pts)

    @property
    def base_np(self) -> int:
        return self.points[0][0]


def parallel_efficiency(series: ScalingSeries) -> list[tuple[int, float]]:
    """Strong-scaling efficiency relative to the smallest measured np.

    efficiency(np) = 100 * (T(base) * base) / (T(np) * np); the base point is
    exactly 100.
    """
    base_np, base_time = series.points[0]
    base_work = base_time * base_np
    # ratio first: the base point divides to exactly 1.0, hence exactly 100
    return [(n, 100.0 * (base_work / (t * n))) for n, t in series.points]


def cost_per_run(metrics: RunMetrics, instance: InstanceType, node_count: int) -> float:
    """On-demand cost of the mean run."""
    if metrics.mean_seconds <= 0:
        raise ValueError("mean_seconds must be positive")
    return estimate_cost(instance, metrics.mean_seconds / 3600.0, node_count)
