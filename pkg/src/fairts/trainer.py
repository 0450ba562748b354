"""Episodic REINFORCE with a per-decision-index empirical baseline."""

from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, List, Optional, Sequence

import numpy as np

from fairts.domain import ResourceConfig, Task
from fairts.env import EnvConfig, FogEnv, observation_dim
from fairts.metrics import EpisodeReport
from fairts.policy import (
    PolicyParams,
    apply_update,
    forward,
    init_params,
    sample_action,
    save_checkpoint,
    weighted_grad,
)
from fairts.workload import WorkloadConfig, derive_seed, generate

log = logging.getLogger(__name__)

MAX_DECISIONS = 10**6
CURVE_HEADER = ["iteration", "avg_slowdown", "ds_variance", "avg_total_reward", "avg_traj_len"]

# seed streams
TRAIN_WORKLOAD, ROLLOUT, EVAL_WORKLOAD, EVAL_AGENT = 0, 1, 2, 3

Agent = Callable[[np.ndarray, FogEnv, np.random.Generator], int]


class RunawayEpisodeError(RuntimeError):
    pass


class TrainingError(RuntimeError):
    pass


@dataclass
class Trajectory:
    observations: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    report: Optional[EpisodeReport]

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def total_reward(self) -> float:
        return math.fsum(self.rewards)


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 500
    episodes_per_iteration: int = 20
    learning_rate: float = 1e-5
    discount: float = 1.0
    hidden: int = 64
    instances: int = 1
    resample_instances: bool = False
    checkpoint_every: int = 50
    seed: int = 0
    resources: ResourceConfig = ResourceConfig((5, 10), 10)
    env: EnvConfig = EnvConfig()
    workload: WorkloadConfig = WorkloadConfig()

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 0 < self.discount <= 1:
            raise ValueError("discount must lie in (0, 1]")
        if self.episodes_per_iteration < 2:
            raise ValueError("episodes_per_iteration must be >= 2")
        if self.iterations < 0 or self.instances < 1 or self.hidden < 1:
            raise ValueError("iterations >= 0, instances >= 1 and hidden >= 1 required")
        if self.episodes_per_iteration < 2 * self.instances:
            raise ValueError("need at least two episodes per workload instance")


@dataclass(frozen=True)
class IterationStats:
    iteration: int
    avg_slowdown: float
    ds_variance: float
    avg_total_reward: float
    avg_traj_len: float

    def row(self) -> list:
        return [self.iteration, repr(self.avg_slowdown), repr(self.ds_variance),
                repr(self.avg_total_reward), repr(self.avg_traj_len)]


class PolicyAgent:
    def __init__(self, params: PolicyParams):
        self.params = params

    def __call__(self, obs: np.ndarray, env: FogEnv, rng: np.random.Generator) -> int:
        return sample_action(forward(self.params, obs), rng)


def run_episode(
    tasks: Sequence[Task],
    agent: Agent,
    rng: np.random.Generator,
    resources: ResourceConfig,
    env_config: EnvConfig,
    max_decisions: Optional[int] = None,
    record: bool = True,
) -> Trajectory:
    """Drive one episode to completion, recording every decision."""
    if max_decisions is None:
        max_decisions = MAX_DECISIONS
    env = FogEnv(resources, env_config)
    obs = env.reset(tasks)
    observations, actions, rewards = [], [], []
    while not env.done:
        if len(actions) >= max_decisions:
            raise RunawayEpisodeError(
                f"episode exceeded {max_decisions} decisions at clock {env.clock} "
                f"with {len(env.completions)}/{len(env.tasks)} tasks complete")
        a = agent(obs, env, rng)
        outcome = env.step(a)
        if record:
            observations.append(obs)
        actions.append(a)
        rewards.append(outcome.reward)
        obs = env.observe()
    report = EpisodeReport.from_completions(env.completions.values()) if tasks else None
    obs_arr = (np.array(observations) if observations
               else np.zeros((0, env.obs_dim)))
    return Trajectory(obs_arr, np.array(actions, dtype=np.int64),
                      np.array(rewards, dtype=float), report)


def compute_returns(rewards: Sequence[float], discount: float) -> np.ndarray:
    out = np.zeros(len(rewards))
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + discount * acc
        out[t] = acc
    return out


def compute_baselines(returns: Sequence[np.ndarray]) -> np.ndarray:
    """Mean return per decision index, cut at the shortest trajectory."""
    if not returns:
        raise ValueError("need at least one trajectory")
    cut = min(len(v) for v in returns)
    return np.mean([v[:cut] for v in returns], axis=0) if cut else np.zeros(0)


def training_instances(config: TrainConfig, iteration: int = 0) -> List[List[Task]]:
    """Workload instances for one iteration.

    Fixed across iterations unless `resample_instances` is set, in which
    case every iteration draws its own.
    """
    keys = (iteration,) if config.resample_instances else ()
    return [
        generate(replace(config.workload,
                         seed=derive_seed(config.seed, TRAIN_WORKLOAD, *keys, e)),
                 config.resources)
        for e in range(config.instances)
    ]


def policy_gradient(params: PolicyParams, groups: Sequence[Sequence[Trajectory]],
                    config: TrainConfig) -> PolicyParams:
    """Accumulated update over trajectories grouped by workload instance."""
    obs, acts, adv = [], [], []
    for trajs in groups:
        returns = [compute_returns(t.rewards, config.discount) for t in trajs]
        base = compute_baselines(returns)
        cut = len(base)
        for t, v in zip(trajs, returns):
            obs.append(t.observations[:cut])
            acts.append(t.actions[:cut])
            adv.append(v[:cut] - base)
    X = np.concatenate(obs) if obs else np.zeros((0, params.dims[0]))
    if len(X) == 0:
        return params.zeros_like()
    g = weighted_grad(params, X, np.concatenate(acts), np.concatenate(adv))
    return PolicyParams(*(config.learning_rate * a for a in g.arrays()))


def _check_identity(traj: Trajectory) -> None:
    # with beta = 0 the undiscounted return is minus the summed slowdown
    if traj.report is None:
        return
    total = traj.report.total_slowdown
    if abs(traj.total_reward + total) > 1e-9 * max(1.0, total):
        raise TrainingError(
            f"reward/slowdown identity broken: reward {traj.total_reward} vs slowdown {total}")


def train_iteration(
    params: PolicyParams,
    task_sets: Sequence[Sequence[Task]],
    config: TrainConfig,
    iteration: int,
) -> tuple:
    agent = PolicyAgent(params)
    groups = [[] for _ in task_sets]
    # episode i runs on instance i mod E; baselines are taken per instance
    for i in range(config.episodes_per_iteration):
        e = i % len(task_sets)
        rng = np.random.default_rng([config.seed, ROLLOUT, iteration, i])
        groups[e].append(run_episode(task_sets[e], agent, rng, config.resources, config.env))
    delta = policy_gradient(params, groups, config)
    if not delta.is_finite():
        raise TrainingError(
            f"non-finite update at iteration {iteration}; "
            f"max |param| = {max(float(np.abs(a).max()) for a in params.arrays())}")
    flat = [t for g in groups for t in g]
    if config.env.beta == 0:
        for t in flat:
            _check_identity(t)
    reports = [t.report for t in flat if t.report is not None]
    stats = IterationStats(
        iteration=iteration,
        avg_slowdown=float(np.mean([r.avg_slowdown for r in reports])) if reports else 0.0,
        ds_variance=float(np.mean([r.ds_variance for r in reports])) if reports else 0.0,
        avg_total_reward=float(np.mean([t.total_reward for t in flat])),
        avg_traj_len=float(np.mean([len(t) for t in flat])),
    )
    return apply_update(params, delta), stats


@dataclass
class TrainResult:
    params: PolicyParams
    curve: List[IterationStats] = field(default_factory=list)


def initial_params(config: TrainConfig) -> PolicyParams:
    return init_params(config.seed,
                       observation_dim(config.resources, config.env),
                       config.hidden, config.env.n_actions)


def train(
    config: TrainConfig,
    out_dir=None,
    params: Optional[PolicyParams] = None,
    start_iteration: int = 0,
    on_iteration: Optional[Callable[[IterationStats], None]] = None,
) -> TrainResult:
    """Run `config.iterations` iterations; rows are numbered from start_iteration + 1.

    With `out_dir`, the learning curve is written (appended when resuming)
    to learning_curve.csv, checkpoints to checkpoints/, and the final policy
    to policy.ckpt.
    """
    if params is None:
        params = initial_params(config)
    expected = (observation_dim(config.resources, config.env), config.hidden,
                config.env.n_actions)
    if params.dims != expected:
        raise TrainingError(f"policy dims {params.dims} do not match config {expected}")
    task_sets = None if config.resample_instances else training_instances(config)
    writer = None
    if out_dir is not None:
        out = Path(out_dir)
        (out / "checkpoints").mkdir(parents=True, exist_ok=True)
        curve_path = out / "learning_curve.csv"
        fresh = start_iteration == 0 or not curve_path.exists()
        fh = open(curve_path, "w" if fresh else "a", encoding="utf-8", newline="")
        writer = csv.writer(fh, lineterminator="\n")
        if fresh:
            writer.writerow(CURVE_HEADER)
            save_checkpoint(params, out / "checkpoints" / checkpoint_name(start_iteration))
    result = TrainResult(params)
    try:
        for it in range(start_iteration + 1, start_iteration + config.iterations + 1):
            sets = task_sets if task_sets is not None else training_instances(config, it)
            result.params, stats = train_iteration(result.params, sets, config, it)
            result.curve.append(stats)
            log.info("iter %d slowdown %.4f dsvar %.4f reward %.2f len %.1f", it,
                     stats.avg_slowdown, stats.ds_variance, stats.avg_total_reward,
                     stats.avg_traj_len)
            if writer is not None:
                writer.writerow(stats.row())
                fh.flush()
                if it % config.checkpoint_every == 0:
                    save_checkpoint(result.params, out / "checkpoints" / checkpoint_name(it))
            if on_iteration is not None:
                on_iteration(stats)
    finally:
        if writer is not None:
            fh.close()
    if out_dir is not None:
        save_checkpoint(result.params, out / "policy.ckpt")
    return result


def checkpoint_name(iteration: int) -> str:
    return f"iter_{iteration:05d}.ckpt"


def iteration_from_name(path) -> Optional[int]:
    m = re.search(r"iter_(\d+)\.ckpt$", str(path))
    return int(m.group(1)) if m else None


def read_learning_curve(path) -> List[IterationStats]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        head = next(reader, None)
        if head != CURVE_HEADER:
            raise ValueError(f"{path}: unexpected header {head}")
        return [IterationStats(int(r[0]), float(r[1]), float(r[2]), float(r[3]), float(r[4]))
                for r in reader if r]


def evaluate(
    agent_factory: Callable[[], Agent],
    resources: ResourceConfig,
    env_config: EnvConfig,
    workload: WorkloadConfig,
    runs: int,
    seed: int,
) -> List[EpisodeReport]:
    """One fresh seed-indexed workload per run; empty workloads are skipped."""
    reports = []
    for r in range(runs):
        tasks = generate(replace(workload, seed=derive_seed(seed, EVAL_WORKLOAD, r)), resources)
        rng = np.random.default_rng([seed, EVAL_AGENT, r])
        traj = run_episode(tasks, agent_factory(), rng, resources, env_config, record=False)
        if traj.report is not None:
            reports.append(traj.report)
    return reports
