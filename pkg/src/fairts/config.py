"""Flat `key = value` experiment configuration."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Tuple

from fairts.domain import ResourceConfig
from fairts.env import EnvConfig
from fairts.trainer import TrainConfig
from fairts.workload import WorkloadConfig

SEED_ENV = "FAIRTS_SEED"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    # resources
    capacities: Tuple[int, ...] = (5, 10)
    bandwidth_capacity: int = 10
    # workload
    arrival_rate: float = 0.8
    # shorter than the library default so lr = 1e-5 trains stably
    arrival_horizon: int = 15
    elephant_length: int = 5
    mice_length: int = 1
    elephant_demand_range: Tuple[float, float] = (0.8, 1.0)
    mice_demand_range: Tuple[float, float] = (0.1, 0.2)
    elephant_prob: float = 0.5
    bw_demand: int = 1
    overhead: int = 2
    # environment
    n_slots: int = 3
    max_multiple: int = 5
    window: int = 5
    backlog_capacity: int = 100
    beta: float = 0.0
    overhead_scale: float = 10.0
    # training
    iterations: int = 500
    episodes_per_iteration: int = 20
    learning_rate: float = 1e-5
    discount: float = 1.0
    hidden: int = 64
    # several fixed instances per run; one instance overfits its task order
    instances: int = 4
    resample_instances: bool = False
    checkpoint_every: int = 50
    # evaluation
    runs: int = 100
    occupied_only: bool = False
    # output and sweeps
    output_dir: str = "runs"
    beta_list: Tuple[float, ...] = (0.0, 200.0, 400.0, 500.0)
    n_list: Tuple[int, ...] = (2, 3, 4, 5)

    @property
    def resources(self) -> ResourceConfig:
        return ResourceConfig(self.capacities, self.bandwidth_capacity)

    @property
    def workload(self) -> WorkloadConfig:
        return WorkloadConfig(
            arrival_rate=self.arrival_rate,
            arrival_horizon=self.arrival_horizon,
            elephant_length=self.elephant_length,
            mice_length=self.mice_length,
            elephant_demand_range=self.elephant_demand_range,
            mice_demand_range=self.mice_demand_range,
            elephant_prob=self.elephant_prob,
            bw_demand=self.bw_demand,
            overhead=self.overhead,
            seed=self.seed,
        )

    @property
    def env(self) -> EnvConfig:
        return EnvConfig(
            n_slots=self.n_slots,
            max_multiple=self.max_multiple,
            window=self.window,
            backlog_capacity=self.backlog_capacity,
            beta=self.beta,
            overhead_scale=self.overhead_scale,
        )

    @property
    def train(self) -> TrainConfig:
        return TrainConfig(
            iterations=self.iterations,
            episodes_per_iteration=self.episodes_per_iteration,
            learning_rate=self.learning_rate,
            discount=self.discount,
            hidden=self.hidden,
            instances=self.instances,
            resample_instances=self.resample_instances,
            checkpoint_every=self.checkpoint_every,
            seed=self.seed,
            resources=self.resources,
            env=self.env,
            workload=self.workload,
        )

    def validate(self) -> "ExperimentConfig":
        # constructing the component configs runs their invariant checks
        try:
            self.train
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        return self

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ", ".join(str(x) for x in v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


def _convert(name: str, raw: str, default):
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if isinstance(default, tuple):
            kind = type(default[0]) if default else float
            items = [x.strip() for x in raw.split(",") if x.strip()]
            return tuple(kind(float(x)) if kind is int and float(x).is_integer() else kind(x)
                         for x in items)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r}") from None


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    defaults = ExperimentConfig()
    known = {f.name for f in fields(ExperimentConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = _convert(key, raw, getattr(defaults, key))
    return replace(defaults, **values).validate()


def load_config(path=None, env=None) -> ExperimentConfig:
    """Defaults, overlaid by the file at `path`, overlaid by FAIRTS_SEED."""
    cfg = ExperimentConfig() if path is None else parse_config(
        Path(path).read_text(encoding="utf-8"), str(path))
    env = os.environ if env is None else env
    if env.get(SEED_ENV):
        try:
            cfg = replace(cfg, seed=int(env[SEED_ENV]))
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer") from None
    return cfg.validate()
