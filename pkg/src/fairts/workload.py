"""Synthetic elephant/mice workloads and the task CSV format."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from fairts.domain import DomainError, ResourceConfig, Task

log = logging.getLogger(__name__)


class WorkloadFormatError(ValueError):
    pass


@dataclass(frozen=True)
class WorkloadConfig:
    arrival_rate: float = 0.8
    arrival_horizon: int = 50
    elephant_length: int = 5
    mice_length: int = 1
    elephant_demand_range: Tuple[float, float] = (0.8, 1.0)
    mice_demand_range: Tuple[float, float] = (0.1, 0.2)
    elephant_prob: float = 0.5
    bw_demand: int = 1
    overhead: int = 2
    seed: int = 0

    def __post_init__(self):
        if not self.arrival_rate >= 0:
            raise ValueError("arrival_rate must be >= 0")
        if self.arrival_horizon < 1:
            raise ValueError("arrival_horizon must be >= 1")
        if not 0.0 <= self.elephant_prob <= 1.0:
            raise ValueError("elephant_prob must lie in [0, 1]")
        for name in ("elephant_demand_range", "mice_demand_range"):
            lo, hi = getattr(self, name)
            if not 0.0 <= lo <= hi <= 1.0:
                raise ValueError(f"{name} must satisfy 0 <= lo <= hi <= 1")
        if self.elephant_length < 1 or self.mice_length < 1:
            raise ValueError("task lengths must be >= 1")
        if self.overhead < 0 or self.bw_demand < 1:
            raise ValueError("overhead must be >= 0 and bw_demand >= 1")


def demand_choices(frac_range: Tuple[float, float], capacity: int) -> Tuple[int, ...]:
    """Integer unit counts inside [lo*capacity, hi*capacity], at least 1."""
    lo, hi = frac_range
    # round away float noise such as 0.1 * 30 = 3.0000000000000004
    a = max(1, math.ceil(round(lo * capacity, 9)))
    b = min(capacity, math.floor(round(hi * capacity, 9)))
    if a > b:
        nearest = min(capacity, max(1, round((lo + hi) / 2 * capacity)))
        log.warning(
            "demand range %s of capacity %d holds no integer; using %d",
            frac_range, capacity, nearest,
        )
        return (nearest,)
    return tuple(range(a, b + 1))


def generate(config: WorkloadConfig, resources: ResourceConfig) -> List[Task]:
    """Draw one episode's task set; deterministic given `config.seed`."""
    rng = np.random.default_rng(config.seed)
    if config.bw_demand > resources.bandwidth_capacity:
        raise DomainError("bw_demand exceeds bandwidth capacity")
    classes = {
        True: (config.elephant_length,
               [demand_choices(config.elephant_demand_range, c) for c in resources.capacities]),
        False: (config.mice_length,
                [demand_choices(config.mice_demand_range, c) for c in resources.capacities]),
    }
    tasks = []
    for t in range(config.arrival_horizon):
        for _ in range(int(rng.poisson(config.arrival_rate))):
            elephant = bool(rng.random() < config.elephant_prob)
            length, choices = classes[elephant]
            demand = tuple(int(opts[rng.integers(len(opts))]) for opts in choices)
            tasks.append(Task(
                id=len(tasks), arrival=t, length=length,
                overhead=config.overhead, demand=demand,
                bw_demand=config.bw_demand,
            ))
    return tasks


def header(m: int) -> List[str]:
    return ["task_id", "arrival", "length", "overhead"] + [f"d_{i + 1}" for i in range(m)] + ["d_bw"]


def dumps_tasks(tasks: Sequence[Task], m: int | None = None) -> str:
    if m is None:
        m = len(tasks[0].demand) if tasks else 2
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header(m))
    for t in tasks:
        if len(t.demand) != m:
            raise ValueError(f"task {t.id} has {len(t.demand)} demands, expected {m}")
        w.writerow([t.id, t.arrival, t.length, t.overhead, *t.demand, t.bw_demand])
    return buf.getvalue()


def save_tasks(tasks: Sequence[Task], path, m: int | None = None) -> None:
    Path(path).write_text(dumps_tasks(tasks, m), encoding="utf-8", newline="\n")


def loads_tasks(text: str) -> List[Task]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise WorkloadFormatError("line 1: missing header")
    head = [h.strip() for h in rows[0]]
    m = len(head) - 5
    if m < 1 or head != header(m):
        raise WorkloadFormatError(f"line 1: unexpected header {head}")
    tasks = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(head):
            raise WorkloadFormatError(
                f"line {lineno}: expected {len(head)} fields, got {len(row)}")
        try:
            vals = [int(v) for v in row]
        except ValueError as e:
            raise WorkloadFormatError(f"line {lineno}: {e}") from None
        try:
            tasks.append(Task(id=vals[0], arrival=vals[1], length=vals[2],
                              overhead=vals[3], demand=tuple(vals[4:4 + m]),
                              bw_demand=vals[4 + m]))
        except DomainError as e:
            raise WorkloadFormatError(f"line {lineno}: {e}") from None
    return tasks


def load_tasks(path) -> List[Task]:
    return loads_tasks(Path(path).read_text(encoding="utf-8"))


def derive_seed(*keys: int) -> int:
    """Stable 32-bit seed for a tuple of stream keys."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])
