"""Discrete-time fog scheduling MDP.

Time advances in integer steps. Inside a step the agent may commit any
number of tasks; a void or invalid action closes the step, at which point
the step reward is emitted and the clock moves on.
"""

from __future__ import annotations

import copy
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Optional, Sequence

import numpy as np

from fairts.domain import (
    Allocation,
    ResourceConfig,
    Task,
    dominant_share,
    exec_delay,
    slowdown,
)

FREE = -1


class ContractError(ValueError):
    """An environment method was called with arguments outside its contract."""


@dataclass(frozen=True)
class EnvConfig:
    n_slots: int = 3
    max_multiple: int = 5
    window: int = 5
    backlog_capacity: int = 100
    beta: float = 0.0
    overhead_scale: float = 10.0

    def __post_init__(self):
        if self.n_slots < 1 or self.max_multiple < 1 or self.window < 1:
            raise ValueError("n_slots, max_multiple and window must be >= 1")
        if self.backlog_capacity < 1:
            raise ValueError("backlog_capacity must be >= 1")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")

    @property
    def n_actions(self) -> int:
        return self.n_slots * self.max_multiple + 1


def encode_action(slot: int, multiple: int, config: EnvConfig) -> int:
    """Slot is 1-based; slot 0 is the void action."""
    if slot == 0:
        return 0
    if not (1 <= slot <= config.n_slots and 1 <= multiple <= config.max_multiple):
        raise ContractError(f"action ({slot}, {multiple}) out of range")
    return (slot - 1) * config.max_multiple + multiple


def decode_action(index: int, config: EnvConfig) -> tuple:
    if not 0 <= index < config.n_actions:
        raise ContractError(f"action index {index} outside [0, {config.n_actions})")
    if index == 0:
        return 0, 0
    return (index - 1) // config.max_multiple + 1, (index - 1) % config.max_multiple + 1


def observation_dim(resources: ResourceConfig, config: EnvConfig) -> int:
    cells = config.window * sum(resources.capacities)
    fog = cells + config.window * resources.bandwidth_capacity
    return fog + config.n_slots * (cells + 2) + 1


@dataclass
class Completion:
    task: Task
    allocation: Allocation
    slowdown: float
    share: float

    @property
    def waiting(self) -> int:
        return self.allocation.start - self.task.arrival


@dataclass
class StepOutcome:
    step_ended: bool
    reward: float = 0.0
    allocation: Optional[Allocation] = None


@dataclass(frozen=True)
class Violation:
    constraint: str  # "C1", "C2" or "C3"
    time: Optional[int]
    detail: str


@dataclass
class FogImage:
    """Lookahead picture of committed resources; row 0 is the current step.

    `owner[i]` is a (window, c_i) grid holding the id of the task occupying
    each unit, or FREE. `used` and `bw_used` are per-row counts kept in
    lockstep with the grids.
    """

    owner: List[np.ndarray]
    used: List[List[int]]
    bw_used: List[int]

    @classmethod
    def empty(cls, resources: ResourceConfig, window: int) -> "FogImage":
        return cls(
            owner=[np.full((window, c), FREE, dtype=np.int64) for c in resources.capacities],
            used=[[0] * resources.m for _ in range(window)],
            bw_used=[0] * window,
        )

    def shift(self) -> None:
        for grid in self.owner:
            grid[:-1] = grid[1:]
            grid[-1] = FREE
        self.used.pop(0)
        self.used.append([0] * len(self.owner))
        self.bw_used.pop(0)
        self.bw_used.append(0)


def earliest_feasible_start(
    fog: FogImage,
    task: Task,
    multiple: int,
    resources: ResourceConfig,
) -> Optional[int]:
    """Smallest offset at which the whole allocation fits inside the window."""
    if multiple < 1:
        raise ContractError("multiple must be >= 1")
    window = len(fog.bw_used)
    caps = resources.capacities
    need = [multiple * d for d in task.demand]
    if any(n > c for n, c in zip(need, caps)):
        return None
    dur = exec_delay(task.length, task.overhead, multiple)
    if dur > window:
        return None
    bw_free = resources.bandwidth_capacity - task.bw_demand
    row_ok = [all(u + n <= c for u, n, c in zip(row, need, caps)) for row in fog.used]
    for o in range(window - dur + 1):
        if fog.bw_used[o] <= bw_free and all(row_ok[o:o + dur]):
            return o
    return None


class FogEnv:
    """One episode of the scheduling MDP.

    >>> env = FogEnv(ResourceConfig((5, 10), 10))
    >>> obs = env.reset([])
    >>> env.done
    True
    """

    def __init__(self, resources: ResourceConfig, config: EnvConfig = EnvConfig()):
        self.resources = resources
        self.config = config
        self.obs_dim = observation_dim(resources, config)
        self._slot_cache: Dict[int, np.ndarray] = {}
        self._empty_slot = np.zeros(config.window * sum(resources.capacities) + 2)
        self.reset([])

    # ---- lifecycle -------------------------------------------------------

    def reset(self, tasks: Sequence[Task]) -> np.ndarray:
        tasks = list(tasks)
        for a, b in zip(tasks, tasks[1:]):
            if (a.arrival, a.id) > (b.arrival, b.id):
                raise ContractError("tasks must be sorted by (arrival, id)")
        if len({t.id for t in tasks}) != len(tasks):
            raise ContractError("task ids must be unique")
        for t in tasks:
            if not t.fits(self.resources):
                raise ContractError(f"task {t.id} can never fit the resource pools")
        self.tasks: List[Task] = tasks
        self.task_by_id: Dict[int, Task] = {t.id: t for t in tasks}
        self.clock = 0
        self.fog = FogImage.empty(self.resources, self.config.window)
        self.slots: List[Optional[Task]] = [None] * self.config.n_slots
        self.backlog: Deque[Task] = deque()
        self.overflow: Deque[Task] = deque()
        self._next_arrival = 0
        self.dwelling: Dict[int, Task] = {}
        self.allocations: Dict[int, Allocation] = {}
        self.active: List[Allocation] = []
        self.shares: Dict[int, float] = {}
        self.completions: Dict[int, Completion] = {}
        self.shown_order: List[int] = []
        self._slot_cache.clear()
        self._reveal()
        return self.observe()

    def clone(self) -> "FogEnv":
        other = copy.copy(self)
        other.fog = FogImage(
            owner=[g.copy() for g in self.fog.owner],
            used=[row[:] for row in self.fog.used],
            bw_used=self.fog.bw_used[:],
        )
        other.slots = self.slots[:]
        other.backlog = deque(self.backlog)
        other.overflow = deque(self.overflow)
        other.dwelling = dict(self.dwelling)
        other.allocations = dict(self.allocations)
        other.active = self.active[:]
        other.shares = dict(self.shares)
        other.completions = dict(self.completions)
        other.shown_order = self.shown_order[:]
        return other

    @property
    def done(self) -> bool:
        return len(self.completions) == len(self.tasks)

    def is_done(self) -> bool:
        return self.done

    @property
    def queued(self) -> int:
        """Revealed tasks waiting behind the Taskslots."""
        return len(self.backlog) + len(self.overflow)

    # ---- queueing --------------------------------------------------------

    def _reveal(self) -> None:
        while (self._next_arrival < len(self.tasks)
               and self.tasks[self._next_arrival].arrival <= self.clock):
            task = self.tasks[self._next_arrival]
            self._next_arrival += 1
            self.dwelling[task.id] = task
            if len(self.backlog) < self.config.backlog_capacity and not self.overflow:
                self.backlog.append(task)
            else:
                self.overflow.append(task)
        self._refill()

    def _refill(self) -> None:
        for i, slot in enumerate(self.slots):
            if slot is None and self.backlog:
                task = self.backlog.popleft()
                self.slots[i] = task
                self.shown_order.append(task.id)
        while self.overflow and len(self.backlog) < self.config.backlog_capacity:
            self.backlog.append(self.overflow.popleft())

    # ---- observation -----------------------------------------------------

    def _slot_image(self, task: Optional[Task]) -> np.ndarray:
        if task is None:
            return self._empty_slot
        img = self._slot_cache.get(task.id)
        if img is None:
            w = self.config.window
            rows = min(task.length, w)
            parts = []
            for d, c in zip(task.demand, self.resources.capacities):
                grid = np.zeros((w, c))
                grid[:rows, :d] = 1.0
                parts.append(grid.ravel())
            parts.append(np.array([
                task.bw_demand / self.resources.bandwidth_capacity,
                task.overhead / self.config.overhead_scale,
            ]))
            img = np.concatenate(parts)
            self._slot_cache[task.id] = img
        return img

    def observe(self) -> np.ndarray:
        """Constant-size flat encoding of the current state."""
        w = self.config.window
        cbw = self.resources.bandwidth_capacity
        bw = np.zeros((w, cbw))
        for s, u in enumerate(self.fog.bw_used):
            bw[s, :u] = 1.0
        parts = [(g != FREE).ravel().astype(float) for g in self.fog.owner]
        parts.append(bw.ravel())
        parts.extend(self._slot_image(t) for t in self.slots)
        parts.append(np.array([min(self.queued, self.config.backlog_capacity)
                               / self.config.backlog_capacity]))
        return np.concatenate(parts)

    encode_observation = observe

    # ---- dynamics --------------------------------------------------------

    def feasible_offset(self, task: Task, multiple: int) -> Optional[int]:
        return earliest_feasible_start(self.fog, task, multiple, self.resources)

    def step(self, action: int) -> StepOutcome:
        """Apply one agent decision."""
        slot, multiple = decode_action(int(action), self.config)
        if slot == 0:
            return StepOutcome(True, self.advance_time())
        task = self.slots[slot - 1]
        if task is None:
            return StepOutcome(True, self.advance_time())
        offset = self.feasible_offset(task, multiple)
        if offset is None:
            return StepOutcome(True, self.advance_time())
        alloc = self._commit(task, multiple, offset)
        self.slots[slot - 1] = None
        self._refill()
        return StepOutcome(False, 0.0, alloc)

    apply_action = step

    def _commit(self, task: Task, multiple: int, offset: int) -> Allocation:
        dur = exec_delay(task.length, task.overhead, multiple)
        alloc = Allocation(task.id, self.clock + offset, multiple, dur)
        for s in range(offset, offset + dur):
            row = self.fog.used[s]
            for i, d in enumerate(task.demand):
                need = multiple * d
                grid_row = self.fog.owner[i][s]
                cols = np.flatnonzero(grid_row == FREE)[:need]
                grid_row[cols] = task.id
                row[i] += need
        self.fog.bw_used[offset] += task.bw_demand
        self.allocations[task.id] = alloc
        self.active.append(alloc)
        self.shares[task.id] = dominant_share(task, multiple, self.resources)
        return alloc

    def step_reward(self) -> float:
        t = self.clock
        terms = [1.0 / task.length for task in self.dwelling.values()]
        if self.config.beta:
            g = [self.shares[a.task_id] for a in self.active if a.start <= t]
            if g:
                mean = math.fsum(g) / len(g)
                terms.append(self.config.beta * math.fsum((x - mean) ** 2 for x in g) / len(g))
        return -math.fsum(terms)

    def advance_time(self) -> float:
        """Close the current step: emit its reward and move the clock on."""
        reward = self.step_reward()
        self.clock += 1
        self.fog.shift()
        still = []
        for alloc in self.active:
            if alloc.finish <= self.clock:
                task = self.dwelling.pop(alloc.task_id)
                self.completions[task.id] = Completion(
                    task, alloc, slowdown(task, alloc.finish), self.shares[task.id])
            else:
                still.append(alloc)
        self.active = still
        self._reveal()
        return reward

    # ---- verification ----------------------------------------------------

    def audit(self) -> List[Violation]:
        """Check the full committed schedule against C1-C3."""
        out = []
        caps = self.resources.capacities
        bw_by_start: Dict[int, int] = {}
        usage: Dict[int, List[int]] = {}
        for alloc in self.allocations.values():
            task = self.task_by_id[alloc.task_id]
            if alloc.start < task.arrival or alloc.multiple < 1:
                out.append(Violation("C1", alloc.start,
                                     f"task {task.id} start={alloc.start} "
                                     f"arrival={task.arrival} k={alloc.multiple}"))
            bw_by_start[alloc.start] = bw_by_start.get(alloc.start, 0) + task.bw_demand
            for t in range(alloc.start, alloc.finish):
                row = usage.setdefault(t, [0] * len(caps))
                for i, d in enumerate(task.demand):
                    row[i] += alloc.multiple * d
        for t in sorted(bw_by_start):
            if bw_by_start[t] > self.resources.bandwidth_capacity:
                out.append(Violation("C2", t, f"bandwidth {bw_by_start[t]} > "
                                              f"{self.resources.bandwidth_capacity}"))
        for t in sorted(usage):
            for i, (u, c) in enumerate(zip(usage[t], caps)):
                if u > c:
                    out.append(Violation("C3", t, f"resource {i}: {u} > {c}"))
        return out
