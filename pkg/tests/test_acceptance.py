"""One pass/fail line per acceptance criterion, at the stated tolerances.

The learning criteria (5-7) share one set of training runs: three seeds at
beta in {0, 200, 400, 500} with n = 3, plus n in {2, 5} at beta = 0.
Expect roughly 25 minutes on one core.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.stats import spearmanr

from fairts.baselines import RandomScheduler, SetScheduler, random_decide
from fairts.config import ExperimentConfig
from fairts.domain import ResourceConfig, Task
from fairts.env import EnvConfig, FogEnv
from fairts.metrics import aggregate
from fairts.policy import PolicyParams, grad_log_prob, init_params, log_prob
from fairts.trainer import PolicyAgent, evaluate, run_episode, train
from fairts.workload import WorkloadConfig, derive_seed, generate

from oracles import (
    exhaustive_optimum,
    hand_exec_delay,
    hand_slowdown,
    offline_lower_bound,
    schedule_ok,
)

SEEDS = (0, 1, 2)
BETAS = (0.0, 200.0, 400.0, 500.0)
EVAL_RUNS = 100
EVAL_SEED = 12345
BASE = ExperimentConfig()


# collected for the terminal summary in conftest.py
LINES = []


def report(crit, ok, detail):
    line = f"CRITERION {crit}: {'PASS' if ok else 'FAIL'} - {detail}"
    LINES.append(line)
    print("\n" + line)
    if not ok:
        pytest.fail(f"criterion {crit}: {detail}")


def random_agent(obs, env, rng):
    return random_decide(env, rng)


# ---- 1-4: exact properties ---------------------------------------------------

def test_criterion_1_reward_identity():
    t0 = time.time()
    worst, episodes = 0.0, 0
    for e in range(200):
        tasks = generate(replace(BASE.workload, seed=derive_seed(7, e)), BASE.resources)
        traj = run_episode(tasks, random_agent, np.random.default_rng([7, e]),
                           BASE.resources, replace(BASE.env, beta=0.0))
        total = math.fsum(r.slowdown for r in traj.report.rows) if tasks else 0.0
        worst = max(worst, abs(traj.total_reward + total))
        episodes += 1
    ok = worst <= 1e-9 and time.time() - t0 < 60
    report("1", ok, f"{episodes} episodes, max |sum r + sum f| = {worst:.3g}, "
                    f"{time.time() - t0:.1f}s")


def test_criterion_2_constraint_audit():
    t0 = time.time()
    actions, violations, episodes = 0, 0, 0
    while episodes < 500 or actions < 100_000:
        tasks = generate(replace(BASE.workload, seed=derive_seed(8, episodes)), BASE.resources)
        env = FogEnv(BASE.resources, BASE.env)
        env.reset(tasks)
        rng = np.random.default_rng([8, episodes])
        while not env.done:
            env.step(int(rng.integers(BASE.env.n_actions)))
            actions += 1
        violations += len(env.audit())
        episodes += 1
    ok = violations == 0 and time.time() - t0 < 120
    report("2", ok, f"{actions} random actions over {episodes} episodes, "
                    f"{violations} violations, {time.time() - t0:.1f}s")


def test_criterion_3_gradient_oracle():
    t0 = time.time()
    rng = np.random.default_rng(3)
    worst, trial, skipped = 0.0, 0, 0
    while trial < 100:
        p = init_params(1000 + trial + skipped, 20, 8, 7)
        p.b1 = rng.normal(size=8) * 0.1
        p.b2 = rng.normal(size=7) * 0.1
        x = rng.normal(size=20)
        a = int(rng.integers(7))
        # a +-h step on W1 moves a pre-activation by up to h*(max|x| + 1);
        # central differences are meaningless across the ReLU kink
        if np.abs(p.W1 @ x + p.b1).min() <= 1e-3 * (np.abs(x).max() + 1):
            skipped += 1
            continue
        trial += 1
        flat, dims = p.flat(), p.dims
        fd = np.zeros_like(flat)
        for j in range(flat.size):
            up, dn = flat.copy(), flat.copy()
            up[j] += 1e-3
            dn[j] -= 1e-3
            fd[j] = (log_prob(PolicyParams.from_flat(up, *dims), x, a)
                     - log_prob(PolicyParams.from_flat(dn, *dims), x, a)) / 2e-3
        g = grad_log_prob(p, x, a).flat()
        worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(g), np.linalg.norm(fd)))
    ok = worst <= 1e-4 and time.time() - t0 < 60
    report("3", ok, f"100 triples ({skipped} redrawn near the ReLU kink), max relative "
                    f"error {worst:.3g}, {time.time() - t0:.1f}s")


def tiny_instances():
    rng = np.random.default_rng(4)
    out = [
        [Task(0, 0, 2, 0, (1, 1), 1), Task(1, 0, 2, 0, (1, 1), 1), Task(2, 0, 2, 0, (1, 1), 1)],
        [Task(0, 0, 3, 1, (2, 2), 1), Task(1, 1, 1, 0, (1, 1), 1)],
        [Task(0, 0, 3, 0, (1, 2), 2), Task(1, 0, 1, 2, (1, 1), 1), Task(2, 2, 2, 1, (2, 1), 1)],
    ]
    while len(out) < 40:
        n = int(rng.integers(1, 4))
        arrivals = sorted(int(a) for a in rng.integers(0, 3, size=n))
        out.append([Task(j, arrivals[j], int(rng.integers(1, 4)), int(rng.integers(0, 3)),
                         tuple(int(d) for d in rng.integers(1, 3, size=2)),
                         int(rng.integers(1, 3)))
                    for j in range(n)])
    return out


def test_criterion_4_tiny_oracle():
    t0 = time.time()
    res = ResourceConfig((2, 2), 2)
    cfg = EnvConfig(n_slots=3, max_multiple=2, window=3)
    problems = []
    schedulers = [RandomScheduler(), RandomScheduler(occupied_only=True), SetScheduler(),
                  PolicyAgent(init_params(0, FogEnv(res, cfg).obs_dim, 8, cfg.n_actions))]
    checked = 0
    for idx, tasks in enumerate(tiny_instances()):
        best, seq = exhaustive_optimum(tasks, res, cfg)
        # replay the optimal sequence and compare with the hand model
        env = FogEnv(res, cfg)
        env.reset(tasks)
        for a in seq:
            env.step(a)
        if not env.done:
            problems.append(f"instance {idx}: optimal sequence does not finish")
            continue
        plan = {}
        for t in tasks:
            c = env.completions[t.id]
            s, k = c.allocation.start, c.allocation.multiple
            plan[t.id] = (s, k)
            if c.allocation.finish != s + hand_exec_delay(t.length, t.overhead, k):
                problems.append(f"instance {idx}: finish mismatch for task {t.id}")
            if abs(c.slowdown - float(hand_slowdown(t, s, k))) > 1e-12:
                problems.append(f"instance {idx}: slowdown mismatch for task {t.id}")
        if not schedule_ok(tasks, plan, res.capacities, res.bandwidth_capacity):
            problems.append(f"instance {idx}: hand model rejects the schedule")
        hand_total = sum(hand_slowdown(t, *plan[t.id]) for t in tasks)
        if abs(float(hand_total) - best) > 1e-9:
            problems.append(f"instance {idx}: total {best} vs hand {float(hand_total)}")
        lb = offline_lower_bound(tasks, res.capacities, res.bandwidth_capacity, cfg.max_multiple)
        if best < float(lb) - 1e-9:
            problems.append(f"instance {idx}: beats the offline bound")
        for sched in schedulers:
            for r in range(10):
                traj = run_episode(tasks, sched, np.random.default_rng([idx, r]), res, cfg,
                                   record=False)
                if traj.report.total_slowdown < best - 1e-9:
                    problems.append(f"instance {idx}: {type(sched).__name__} beat the oracle")
        checked += 1
    elapsed = time.time() - t0
    ok = not problems and elapsed < 60
    report("4", ok, f"{checked} instances, {len(problems)} problems "
                    f"{problems[:3]}, {elapsed:.1f}s")


# ---- 5-7: learning ---------------------------------------------------------------

class Runs:
    def __init__(self):
        self.curves = {}
        self.evals = {}

    def get(self, beta, n, seed):
        key = (beta, n, seed)
        if key not in self.evals:
            cfg = replace(BASE, beta=beta, n_slots=n, seed=seed).validate()
            result = train(cfg.train)
            self.curves[key] = result.curve
            params = result.params
            reports = evaluate(lambda: PolicyAgent(params), cfg.resources, cfg.env,
                               cfg.workload, EVAL_RUNS, EVAL_SEED)
            agg = aggregate(reports)
            self.evals[key] = (agg["avg_slowdown"].mean, agg["ds_variance"].mean)
        return self.evals[key]

    def mean(self, beta, n):
        vals = np.array([self.get(beta, n, s) for s in SEEDS])
        return vals.mean(axis=0)


@pytest.fixture(scope="module")
def runs():
    return Runs()


@pytest.fixture(scope="module")
def baselines():
    out = {}
    for name, factory in (("random", RandomScheduler), ("set", SetScheduler)):
        agg = aggregate(evaluate(factory, BASE.resources, BASE.env, BASE.workload,
                                 EVAL_RUNS, EVAL_SEED))
        out[name] = (agg["avg_slowdown"].mean, agg["ds_variance"].mean)
    return out


def test_criterion_5_learning(runs, baselines):
    t0 = time.time()
    fair = runs.mean(0.0, 3)
    first = np.mean([runs.curves[(0.0, 3, s)][0].avg_slowdown for s in SEEDS])
    final = np.mean([np.mean([st.avg_slowdown for st in runs.curves[(0.0, 3, s)][-10:]])
                     for s in SEEDS])
    rnd, st_ = baselines["random"][0], baselines["set"][0]
    ok = final <= 0.6 * first and fair[0] <= 1.1 * st_ and rnd >= 1.5 * st_
    report("5", ok, f"train slowdown iter1 {first:.3f} -> last10 {final:.3f} "
                    f"(ratio {final / first:.3f}); eval FairTS {fair[0]:.3f}, "
                    f"SET {st_:.3f} (ratio {fair[0] / st_:.3f}), Random {rnd:.3f} "
                    f"(ratio {rnd / st_:.3f}); {time.time() - t0:.0f}s")


def test_criterion_6_fairness_tradeoff(runs):
    t0 = time.time()
    pts = np.array([runs.mean(b, 3) for b in BETAS])
    slow, dsv = pts[:, 0], pts[:, 1]
    rho_v = spearmanr(BETAS, dsv).statistic
    rho_s = spearmanr(BETAS, slow).statistic
    checks = {
        "dsvar(500)<dsvar(0)": dsv[-1] < dsv[0],
        "slowdown(500)>slowdown(0)": slow[-1] > slow[0],
        "rho(beta,dsvar)<=-0.8": rho_v <= -0.8,
        "rho(beta,slowdown)>=0.8": rho_s >= 0.8,
    }
    failed = [k for k, v in checks.items() if not v]
    report("6", not failed,
           f"slowdown {np.round(slow, 3).tolist()}, dsvar {np.round(dsv, 5).tolist()}, "
           f"rho_dsvar {rho_v:.2f}, rho_slowdown {rho_s:.2f}; failed {failed}; "
           f"{time.time() - t0:.0f}s")


def test_criterion_7_taskslots(runs):
    t0 = time.time()
    s2, s5 = runs.mean(0.0, 2)[0], runs.mean(0.0, 5)[0]
    ok = s5 <= 0.95 * s2
    report("7", ok, f"slowdown n=2 {s2:.3f}, n=5 {s5:.3f}, margin {1 - s5 / s2:.1%}; "
                    f"{time.time() - t0:.0f}s")


# ---- 8-9 ---------------------------------------------------------------------------

def test_criterion_8_set_vs_random_fairness(baselines):
    v_set, v_rnd = baselines["set"][1], baselines["random"][1]
    report("8", v_set > v_rnd, f"{EVAL_RUNS} runs, ds_variance SET {v_set:.5f}, "
                               f"Random {v_rnd:.5f}")


def test_criterion_9_determinism(tmp_path):
    from fairts.cli import main
    cfg = tmp_path / "c.cfg"
    cfg.write_text("iterations = 5\nruns = 10\n")
    for d in ("a", "b"):
        out = tmp_path / d
        assert main(["train", "--config", str(cfg), "--out-dir", str(out)]) == 0
        assert main(["compare", "--config", str(cfg), "--schedulers",
                     f"random,set,fairts:{out / 'policy.ckpt'}",
                     "--out", str(out / "compare.csv")]) == 0
    same = {name: (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
            for name in ("learning_curve.csv", "compare.csv", "compare_runs.csv")}
    report("9", all(same.values()), f"byte-identical: {same}")
