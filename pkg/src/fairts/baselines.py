"""Random and Shortest-Execution-Time benchmark schedulers.

Both pick a Taskslot uniformly over all n slots (empty ones included, so an
unlucky pick ends the step) and return void when every slot is empty.
"""

from __future__ import annotations

import numpy as np

from fairts.domain import ResourceConfig, Task, exec_delay
from fairts.env import EnvConfig, FogEnv, encode_action


def set_optimal_multiple(length: int, overhead: int, max_multiple: int) -> int:
    """Multiple minimising execution delay; ties go to the smaller multiple."""
    best_k, best = 1, exec_delay(length, overhead, 1)
    for k in range(2, max_multiple + 1):
        d = exec_delay(length, overhead, k)
        if d < best:
            best_k, best = k, d
    return best_k


def set_multiple_for(task: Task, resources: ResourceConfig, config: EnvConfig) -> int:
    """SET multiple among those that could ever be placed.

    A multiple whose demand exceeds a pool, or whose delay exceeds the window,
    is rejected on every step, so choosing it would stall the slot forever.
    Busy-now feasibility is still ignored.
    """
    ok = [k for k in range(1, config.max_multiple + 1)
          if all(k * d <= c for d, c in zip(task.demand, resources.capacities))
          and exec_delay(task.length, task.overhead, k) <= config.window]
    if not ok:
        return set_optimal_multiple(task.length, task.overhead, config.max_multiple)
    return min(ok, key=lambda k: (exec_delay(task.length, task.overhead, k), k))


def _pick_slot(env: FogEnv, rng: np.random.Generator, occupied_only: bool):
    """1-based slot index, or None when every slot is empty."""
    occupied = [i for i, t in enumerate(env.slots) if t is not None]
    if not occupied:
        return None
    if occupied_only:
        return occupied[int(rng.integers(len(occupied)))] + 1
    return int(rng.integers(env.config.n_slots)) + 1


def random_decide(env: FogEnv, rng: np.random.Generator, occupied_only: bool = False) -> int:
    slot = _pick_slot(env, rng, occupied_only)
    if slot is None:
        return 0
    k = int(rng.integers(env.config.max_multiple)) + 1
    return encode_action(slot, k, env.config)


def set_decide(env: FogEnv, rng: np.random.Generator, occupied_only: bool = False) -> int:
    slot = _pick_slot(env, rng, occupied_only)
    if slot is None:
        return 0
    task = env.slots[slot - 1]
    if task is None:
        # an empty pick is invalid whatever the multiple; 1 keeps it in range
        return encode_action(slot, 1, env.config)
    k = set_multiple_for(task, env.resources, env.config)
    return encode_action(slot, k, env.config)


class RandomScheduler:
    name = "random"

    def __init__(self, occupied_only: bool = False):
        self.occupied_only = occupied_only

    def __call__(self, obs, env: FogEnv, rng: np.random.Generator) -> int:
        return random_decide(env, rng, self.occupied_only)


class SetScheduler:
    name = "set"

    def __init__(self, occupied_only: bool = False):
        self.occupied_only = occupied_only

    def __call__(self, obs, env: FogEnv, rng: np.random.Generator) -> int:
        return set_decide(env, rng, self.occupied_only)
