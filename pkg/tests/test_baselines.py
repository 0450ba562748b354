import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fairts.baselines import (
    RandomScheduler,
    SetScheduler,
    random_decide,
    set_decide,
    set_optimal_multiple,
)
from fairts.domain import ResourceConfig, exec_delay
from fairts.env import EnvConfig, FogEnv, decode_action
from fairts.workload import WorkloadConfig, generate

from conftest import make_task

RES = ResourceConfig((5, 10), 10)


@pytest.mark.parametrize("l,b,K,k", [(5, 2, 5, 1), (9, 1, 5, 3), (1, 0, 5, 1)])
def test_set_examples(l, b, K, k):
    assert set_optimal_multiple(l, b, K) == k


def test_set_enumeration_values():
    assert [exec_delay(9, 1, k) for k in range(1, 6)] == [9, 6, 5, 6, 6]
    assert [exec_delay(5, 2, k) for k in (1, 2)] == [5, 5]


def test_set_exhaustive():
    for l in range(1, 51):
        for b in range(0, 11):
            for K in range(1, 11):
                delays = [exec_delay(l, b, k) for k in range(1, K + 1)]
                assert set_optimal_multiple(l, b, K) == delays.index(min(delays)) + 1


def env_with(slots, cfg):
    env = FogEnv(RES, cfg)
    env.reset([])
    env.slots = list(slots)
    return env


class TestRandom:
    def test_all_empty_void(self):
        env = env_with([None] * 3, EnvConfig())
        rng = np.random.default_rng(0)
        assert all(random_decide(env, rng) == 0 for _ in range(50))

    def test_single_choice(self):
        cfg = EnvConfig(n_slots=1, max_multiple=1)
        env = env_with([make_task(0)], cfg)
        rng = np.random.default_rng(0)
        assert all(decode_action(random_decide(env, rng), cfg) == (1, 1) for _ in range(50))

    def test_uniform_over_slots_and_multiples(self):
        cfg = EnvConfig()
        env = env_with([make_task(0), None, None], cfg)
        rng = np.random.default_rng(123)
        draws = np.array([random_decide(env, rng) for _ in range(100_000)])
        freq = np.bincount(draws, minlength=cfg.n_actions)[1:] / draws.size
        assert np.all(np.abs(freq - 1 / 15) <= 0.01)
        assert not (draws == 0).any()

    def test_occupied_only(self):
        cfg = EnvConfig()
        env = env_with([None, make_task(0), None], cfg)
        rng = np.random.default_rng(0)
        slots = {decode_action(random_decide(env, rng, occupied_only=True), cfg)[0]
                 for _ in range(200)}
        assert slots == {2}


class TestSet:
    def test_all_empty_void(self):
        env = env_with([None] * 3, EnvConfig())
        assert set_decide(env, np.random.default_rng(0)) == 0

    def test_optimal_multiple_for_slot(self):
        cfg = EnvConfig(n_slots=1)
        env = env_with([make_task(0, length=9, overhead=1)], cfg)
        assert decode_action(set_decide(env, np.random.default_rng(0)), cfg) == (1, 3)

    def test_empty_pick_ends_step(self):
        cfg = EnvConfig(n_slots=2)
        env = FogEnv(RES, cfg)
        env.reset([make_task(0)])
        rng = np.random.default_rng(0)
        # find a draw that lands on the empty second slot
        while True:
            state = rng.bit_generator.state
            a = set_decide(env, rng)
            if decode_action(a, cfg)[0] == 2:
                break
        assert env.step(a).step_ended and env.clock == 1


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 5000), n=st.integers(1, 5), K=st.integers(1, 6))
def test_baselines_stay_in_range_and_finish(seed, n, K):
    cfg = EnvConfig(n_slots=n, max_multiple=K)
    tasks = generate(WorkloadConfig(arrival_horizon=8, seed=seed), RES)
    for sched in (RandomScheduler(), SetScheduler()):
        env = FogEnv(RES, cfg)
        obs = env.reset(tasks)
        rng = np.random.default_rng(seed)
        steps = 0
        while not env.done:
            a = sched(obs, env, rng)
            assert 0 <= a < cfg.n_actions
            env.step(a)
            obs = env.observe()
            steps += 1
            assert steps < 100_000
        assert env.audit() == []


def test_set_skips_multiples_that_never_fit():
    from fairts.baselines import set_multiple_for
    tiny = ResourceConfig((2, 2), 2)
    cfg = EnvConfig(max_multiple=2, window=3)
    # k = 2 is faster but needs 4 memory units out of 2
    t = make_task(0, length=3, overhead=0, demand=(1, 2), bw=2)
    assert set_optimal_multiple(3, 0, 2) == 2
    assert set_multiple_for(t, tiny, cfg) == 1
    # exec 2 at k = 2 fits, exec 4 at k = 1 does not fit a window of 3
    assert set_multiple_for(make_task(1, length=4, demand=(1, 1)), tiny, cfg) == 2


def test_set_matches_plain_rule_on_table1():
    from fairts.baselines import set_multiple_for
    cfg = EnvConfig()
    for length, demand in ((5, (4, 8)), (5, (5, 10)), (1, (1, 2)), (1, (1, 1))):
        t = make_task(0, length=length, overhead=2, demand=demand)
        assert set_multiple_for(t, RES, cfg) == set_optimal_multiple(length, 2, 5)
