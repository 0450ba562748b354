"""Core value types and closed-form task quantities."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple


class DomainError(ValueError):
    """Raised when a closed-form quantity is evaluated outside its domain."""


@dataclass(frozen=True)
class ResourceConfig:
    """Capacities of the compute pools plus the wireless link, in units."""

    capacities: Tuple[int, ...]
    bandwidth_capacity: int

    def __post_init__(self):
        caps = tuple(int(c) for c in self.capacities)
        object.__setattr__(self, "capacities", caps)
        if len(caps) < 1:
            raise DomainError("at least one compute resource is required")
        if any(c < 1 for c in caps):
            raise DomainError(f"capacities must be >= 1, got {caps}")
        if self.bandwidth_capacity < 1:
            raise DomainError("bandwidth capacity must be >= 1")

    @property
    def m(self) -> int:
        return len(self.capacities)


@dataclass(frozen=True)
class Task:
    id: int
    arrival: int
    length: int
    overhead: int
    demand: Tuple[int, ...]
    bw_demand: int

    def __post_init__(self):
        object.__setattr__(self, "demand", tuple(int(d) for d in self.demand))
        if self.arrival < 0:
            raise DomainError(f"task {self.id}: arrival must be >= 0")
        if self.length < 1:
            raise DomainError(f"task {self.id}: length must be >= 1")
        if self.overhead < 0:
            raise DomainError(f"task {self.id}: overhead must be >= 0")
        if not self.demand or any(d < 1 for d in self.demand):
            raise DomainError(f"task {self.id}: demands must be >= 1")
        if self.bw_demand < 1:
            raise DomainError(f"task {self.id}: bandwidth demand must be >= 1")

    def fits(self, config: ResourceConfig) -> bool:
        """True if the task could ever be scheduled with multiple 1."""
        return (
            len(self.demand) == config.m
            and all(d <= c for d, c in zip(self.demand, config.capacities))
            and self.bw_demand <= config.bandwidth_capacity
        )


@dataclass(frozen=True)
class Allocation:
    task_id: int
    start: int
    multiple: int
    exec_delay: int

    @property
    def finish(self) -> int:
        return self.start + self.exec_delay

    def running_at(self, t: int) -> bool:
        return self.start <= t < self.finish


def exec_delay(length: int, overhead: int, multiple: int) -> int:
    """Execution steps of a task given `multiple` copies of its demand.

    ceil(length / multiple + overhead * (multiple - 1)), evaluated in exact
    integer arithmetic.
    """
    if multiple < 1:
        raise DomainError(f"multiple must be >= 1, got {multiple}")
    if length < 1 or overhead < 0:
        raise DomainError(f"invalid task shape length={length} overhead={overhead}")
    num = length + overhead * multiple * (multiple - 1)
    return -(-num // multiple)


def finish_time(start: int, exec_steps: int) -> int:
    if start < 0:
        raise DomainError(f"start must be >= 0, got {start}")
    return start + exec_steps


def slowdown(task: Task, finish: int) -> float:
    """Dwell time normalised by task length."""
    if finish <= task.arrival:
        raise DomainError(
            f"task {task.id}: finish {finish} not after arrival {task.arrival}"
        )
    return (finish - task.arrival) / task.length


def dominant_share(task: Task, multiple: int, config: ResourceConfig) -> float:
    """Largest per-resource share of an allocation.

    The bandwidth share is not scaled by the multiple: the upload happens
    once regardless of how many quotas the task receives.
    """
    if multiple < 1:
        raise DomainError(f"multiple must be >= 1, got {multiple}")
    shares = []
    for d, c in zip(task.demand, config.capacities):
        if multiple * d > c:
            raise DomainError(
                f"task {task.id}: multiple {multiple} exceeds capacity {c}"
            )
        shares.append(multiple * d / c)
    if task.bw_demand > config.bandwidth_capacity:
        raise DomainError(f"task {task.id}: bandwidth demand exceeds capacity")
    shares.append(task.bw_demand / config.bandwidth_capacity)
    return max(shares)
