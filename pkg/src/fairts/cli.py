"""Command-line experiment driver.

    fairts generate --config F --seed S --out tasks.csv
    fairts train    --config F --out-dir D [--resume CKPT] [--plot]
    fairts compare  --config F --schedulers random,set,fairts:D/policy.ckpt --runs R --out P
    fairts sweep    --config F --axis {beta|n} --out-dir D [--parallel] [--plot]
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional

from fairts.baselines import RandomScheduler, SetScheduler
from fairts.config import ConfigError, ExperimentConfig, load_config
from fairts.env import observation_dim
from fairts.metrics import aggregate
from fairts.policy import CheckpointError, load_checkpoint
from fairts.trainer import (
    PolicyAgent,
    TrainingError,
    evaluate,
    iteration_from_name,
    read_learning_curve,
    train,
)
from fairts.workload import generate, save_tasks

log = logging.getLogger("fairts")

COMPARE_HEADER = ["scheduler", "beta", "n", "seed", "avg_slowdown", "ds_variance", "runs"]
RUNS_HEADER = ["scheduler", "run", "avg_slowdown", "ds_variance"]
SWEEP_HEADER = ["axis", "value", "obs_dim", "avg_slowdown", "avg_slowdown_stderr",
                "ds_variance", "ds_variance_stderr", "runs"]


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class SchedulerSpec:
    name: str
    checkpoint: Optional[str] = None

    def factory(self, cfg: ExperimentConfig):
        if self.name == "random":
            return lambda: RandomScheduler(cfg.occupied_only)
        if self.name == "set":
            return lambda: SetScheduler(cfg.occupied_only)
        params = load_checkpoint(self.checkpoint)
        expected = (observation_dim(cfg.resources, cfg.env), cfg.env.n_actions)
        got = (params.dims[0], params.dims[2])
        if got != expected:
            raise CheckpointError(
                f"{self.checkpoint}: policy (input, actions) = {got}, config needs {expected}")
        return lambda: PolicyAgent(params)


def parse_schedulers(text: str) -> List[SchedulerSpec]:
    out = []
    for item in (s.strip() for s in text.split(",")):
        if not item:
            continue
        name, _, ckpt = item.partition(":")
        if name in ("random", "set") and not ckpt:
            out.append(SchedulerSpec(name))
        elif name == "fairts" and ckpt:
            out.append(SchedulerSpec(name, ckpt))
        else:
            raise UsageError(f"bad scheduler {item!r}; use random, set or fairts:CKPT")
    if not out:
        raise UsageError("no schedulers given")
    return out


def _fmt(x: float) -> str:
    return repr(float(x))


# ---- commands ---------------------------------------------------------------

def cmd_generate(cfg: ExperimentConfig, out) -> int:
    tasks = generate(cfg.workload, cfg.resources)
    save_tasks(tasks, out, m=cfg.resources.m)
    elephants = sum(t.length == cfg.elephant_length for t in tasks)
    print(f"{len(tasks)} tasks ({elephants} elephant, {len(tasks) - elephants} mice) -> {out}")
    return 0


def cmd_train(cfg: ExperimentConfig, out_dir, resume=None, plot=False) -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.to_text(), encoding="utf-8")
    params, start = None, 0
    if resume is not None:
        params = load_checkpoint(resume)
        curve = out / "learning_curve.csv"
        if curve.exists():
            start = len(read_learning_curve(curve))
        else:
            start = iteration_from_name(resume) or 0
    result = train(cfg.train, out_dir=out, params=params, start_iteration=start)
    if result.curve:
        last = result.curve[-1]
        print(f"iteration {last.iteration}: avg_slowdown {last.avg_slowdown:.4f} "
              f"ds_variance {last.ds_variance:.4f}")
    print(f"policy -> {out / 'policy.ckpt'}")
    if plot:
        from fairts import report
        report.plot_learning_curve(out / "learning_curve.csv", out / "learning_curve.png")
    return 0


def compare_rows(cfg: ExperimentConfig, schedulers: List[SchedulerSpec], runs: int):
    # load every checkpoint before simulating anything
    factories = [(s, s.factory(cfg)) for s in schedulers]
    rows, per_run = [], []
    for spec, factory in factories:
        reports = evaluate(factory, cfg.resources, cfg.env, cfg.workload, runs, cfg.seed)
        if not reports:
            raise UsageError("every evaluation workload was empty")
        agg = aggregate(reports)
        rows.append((spec, agg, len(reports)))
        per_run.extend([spec.name, r, _fmt(rep.avg_slowdown), _fmt(rep.ds_variance)]
                       for r, rep in enumerate(reports))
    return rows, per_run


def cmd_compare(cfg: ExperimentConfig, schedulers: List[SchedulerSpec], runs: int, out,
                plot=False) -> int:
    rows, per_run = compare_rows(cfg, schedulers, runs)
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COMPARE_HEADER)
        for spec, agg, count in rows:
            w.writerow([spec.name, _fmt(cfg.beta), cfg.n_slots, cfg.seed,
                        _fmt(agg["avg_slowdown"].mean), _fmt(agg["ds_variance"].mean), count])
    runs_path = out.with_name(out.stem + "_runs.csv")
    with open(runs_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUNS_HEADER)
        w.writerows(per_run)
    for spec, agg, count in rows:
        s, v = agg["avg_slowdown"], agg["ds_variance"]
        print(f"{spec.name:8s} slowdown {s.mean:.4f} +- {s.stderr:.4f}   "
              f"ds_variance {v.mean:.5f} +- {v.stderr:.5f}   ({count} runs)")
    if plot:
        from fairts import report
        report.plot_comparison(runs_path, out.with_suffix(".png"))
    return 0


def _sweep_point(cfg: ExperimentConfig, axis: str, value, out_dir: str):
    point = replace(cfg, beta=float(value)) if axis == "beta" else replace(cfg, n_slots=int(value))
    point = point.validate()
    d = Path(out_dir) / f"{axis}_{value}"
    d.mkdir(parents=True, exist_ok=True)
    (d / "config.txt").write_text(point.to_text(), encoding="utf-8")
    train(point.train, out_dir=d)
    rows, _ = compare_rows(point, [SchedulerSpec("fairts", str(d / "policy.ckpt"))], point.runs)
    _, agg, count = rows[0]
    s, v = agg["avg_slowdown"], agg["ds_variance"]
    return [axis, value, observation_dim(point.resources, point.env), _fmt(s.mean),
            _fmt(s.stderr), _fmt(v.mean), _fmt(v.stderr), count]


def cmd_sweep(cfg: ExperimentConfig, axis: str, out_dir, parallel=False, plot=False) -> int:
    values = cfg.beta_list if axis == "beta" else cfg.n_list
    if not values:
        raise UsageError(f"empty {axis}_list in config")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = out / f"sweep_{axis}.csv"
    failures = 0
    with open(summary, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        fh.flush()
        if parallel:
            with ProcessPoolExecutor() as pool:
                futures = [pool.submit(_sweep_point, cfg, axis, v, str(out)) for v in values]
                results = []
                for v, f in zip(values, futures):
                    try:
                        results.append(f.result())
                    except Exception as e:  # keep the other points
                        log.error("%s=%s failed: %s", axis, v, e)
                        failures += 1
                for row in results:
                    w.writerow(row)
        else:
            for v in values:
                try:
                    row = _sweep_point(cfg, axis, v, str(out))
                except Exception as e:
                    log.error("%s=%s failed: %s", axis, v, e)
                    failures += 1
                    continue
                w.writerow(row)
                fh.flush()
                print(f"{axis}={v}: obs_dim {row[2]}, avg_slowdown {float(row[3]):.4f}, "
                      f"ds_variance {float(row[5]):.5f}")
    print(f"summary -> {summary}")
    if plot:
        from fairts import report
        report.plot_sweep(summary, out / f"sweep_{axis}.png")
    return 1 if failures else 0


# ---- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fairts", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic workload CSV")
    g.add_argument("--config")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)

    t = sub.add_parser("train", help="train a FairTS policy")
    t.add_argument("--config")
    t.add_argument("--out-dir", required=True)
    t.add_argument("--resume")
    t.add_argument("--plot", action="store_true", help="render learning_curve.png")

    c = sub.add_parser("compare", help="evaluate schedulers on fresh workloads")
    c.add_argument("--config")
    c.add_argument("--schedulers", required=True)
    c.add_argument("--runs", type=int)
    c.add_argument("--out", required=True)
    c.add_argument("--plot", action="store_true")

    s = sub.add_parser("sweep", help="train and evaluate across beta or n")
    s.add_argument("--config")
    s.add_argument("--axis", choices=["beta", "n"], required=True)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--parallel", action="store_true")
    s.add_argument("--plot", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.command == "generate":
            if args.seed is not None:
                cfg = replace(cfg, seed=args.seed)
            return cmd_generate(cfg, args.out)
        if args.command == "train":
            return cmd_train(cfg, args.out_dir, args.resume, args.plot)
        if args.command == "compare":
            runs = args.runs if args.runs is not None else cfg.runs
            if runs < 1:
                raise UsageError("--runs must be >= 1")
            return cmd_compare(cfg, parse_schedulers(args.schedulers), runs, args.out, args.plot)
        return cmd_sweep(cfg, args.axis, args.out_dir, args.parallel, args.plot)
    except UsageError as e:
        print(f"fairts: usage error: {e}", file=sys.stderr)
        return 2
    except (ConfigError, CheckpointError, TrainingError, OSError, ValueError) as e:
        print(f"fairts: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
