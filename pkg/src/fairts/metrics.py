"""Episode reports and run-level aggregation."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence

from fairts.domain import DomainError
from fairts.env import Completion


@dataclass(frozen=True)
class TaskRecord:
    task_id: int
    slowdown: float
    share: float
    multiple: int
    waiting: int


@dataclass(frozen=True)
class EpisodeReport:
    rows: tuple

    @classmethod
    def from_completions(cls, completions: Iterable[Completion]) -> "EpisodeReport":
        rows = sorted(
            (TaskRecord(c.task.id, c.slowdown, c.share, c.allocation.multiple, c.waiting)
             for c in completions),
            key=lambda r: r.task_id,
        )
        return cls(tuple(rows))

    @property
    def avg_slowdown(self) -> float:
        return avg_slowdown([r.slowdown for r in self.rows])

    @property
    def ds_variance(self) -> float:
        return ds_variance([r.share for r in self.rows])

    @property
    def total_slowdown(self) -> float:
        return math.fsum(r.slowdown for r in self.rows)


def avg_slowdown(slowdowns: Sequence[float]) -> float:
    if len(slowdowns) == 0:
        raise DomainError("average slowdown of an empty task set")
    return math.fsum(slowdowns) / len(slowdowns)


def ds_variance(shares: Sequence[float]) -> float:
    """Population variance of dominant shares."""
    if len(shares) == 0:
        raise DomainError("dominant-share variance of an empty task set")
    # exact rational arithmetic, so identical shares give exactly 0
    return float(statistics.pvariance([float(g) for g in shares]))


@dataclass(frozen=True)
class Summary:
    mean: float
    stderr: float
    count: int


def summarize(values: Sequence[float]) -> Summary:
    n = len(values)
    if n == 0:
        raise DomainError("nothing to summarize")
    mean = math.fsum(values) / n
    if n == 1:
        return Summary(mean, 0.0, 1)
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return Summary(mean, math.sqrt(var / n), n)


def aggregate(reports: Sequence[EpisodeReport]) -> Dict[str, Summary]:
    """Mean and standard error of each metric across runs."""
    if not reports:
        raise DomainError("aggregate needs at least one report")
    return {
        "avg_slowdown": summarize([r.avg_slowdown for r in reports]),
        "ds_variance": summarize([r.ds_variance for r in reports]),
    }
