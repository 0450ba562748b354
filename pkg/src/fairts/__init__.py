"""Online fog task scheduling with dominant-resource fairness.

A discrete-time simulator of quota-based multi-resource allocation, the
FairTS policy-gradient scheduler, and the Random / SET benchmarks.
"""

from fairts.domain import (
    Allocation,
    DomainError,
    ResourceConfig,
    Task,
    dominant_share,
    exec_delay,
    finish_time,
    slowdown,
)

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "DomainError",
    "ResourceConfig",
    "Task",
    "dominant_share",
    "exec_delay",
    "finish_time",
    "slowdown",
]
