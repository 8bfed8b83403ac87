import numpy as np
import pytest

from v2x_aoi.baselines import (BaselineKind, baseline_action, baseline_env_config, run_baseline,
                               run_baseline_episode)
from v2x_aoi.environment import EnvConfig, V2XEnv
from v2x_aoi.noma_phy import evaluate_deliveries


CFG = EnvConfig.create(10)


def test_max_and_oma_use_full_power(rng):
    for kind in (BaselineKind.MAX_GM, BaselineKind.OMA_GM):
        cov, power, override = baseline_action(kind, CFG, rng)
        np.testing.assert_array_equal(power, np.ones(10))
        assert np.all((cov >= 0) & (cov <= CFG.max_coverage))
        assert override == (1 if kind is BaselineKind.OMA_GM else None)


def test_rnd_power_support(rng):
    powers = np.concatenate([baseline_action("RND-GM", CFG, rng)[1] for _ in range(1000)])
    assert powers.size == 10_000
    assert powers.min() >= 0.0 and powers.max() <= 1.0
    assert powers.std() > 0.2


def test_coverage_uniform_over_range(rng):
    cov = np.concatenate([baseline_action("MAX-GM", CFG, rng)[0] for _ in range(1000)])
    assert cov.mean() == pytest.approx(100.0, abs=3.0)


def test_oma_config_caps_group():
    assert baseline_env_config(BaselineKind.OMA_GM, CFG).gm.max_group == 1
    assert baseline_env_config(BaselineKind.MAX_GM, CFG) is CFG


def test_oma_slots_single_transmitter():
    env = V2XEnv(baseline_env_config(BaselineKind.OMA_GM, CFG))
    env.reset(3)
    rng = np.random.default_rng(0)
    while not env.done:
        sched = env.matching.schedule()
        assert sched.sum(axis=0).max() <= 1
        cov, power, _ = baseline_action("OMA-GM", CFG, rng)
        env.step_allocation(cov, power)


def test_allocations_respect_bounds():
    for kind in BaselineKind:
        env = V2XEnv(baseline_env_config(kind, CFG))
        env.reset(1)
        rng = np.random.default_rng(1)
        for _ in range(20):
            cov, power, _ = baseline_action(kind, CFG, rng)
            alloc = env.current_allocation(cov, power)
            assert alloc.schedule.sum(axis=1).max() <= 1
            assert alloc.schedule.sum(axis=0).max() <= env.config.gm.max_group
            env.step_allocation(cov, power)


def test_zero_packets_full_coverage_delivers_every_listening_pair():
    cfg = EnvConfig.create(6, packet_size_kb=0.0, periods=10)
    env = V2XEnv(cfg)
    env.reset(4)
    while not env.done:
        alloc = env.current_allocation(np.full(6, cfg.max_coverage), np.ones(6))
        x = evaluate_deliveries(alloc, env.gains, env.dist)
        y = alloc.schedule
        listening = (y[:, None, :] & ~y[None, :, :]).any(axis=2)
        expected = listening & (env.dist <= cfg.max_coverage)
        np.fill_diagonal(expected, False)
        np.testing.assert_array_equal(x.astype(bool), expected)
        env.step_allocation(np.full(6, cfg.max_coverage), np.ones(6))


def test_deterministic_per_seed():
    small = EnvConfig.create(4, periods=30)
    for kind in BaselineKind:
        assert run_baseline_episode(kind, small, 5) == run_baseline_episode(kind, small, 5)


def test_oma_delivers_less_on_average():
    small = EnvConfig.create(6, periods=50)
    seeds = range(5)
    oma = run_baseline(BaselineKind.OMA_GM, small, seeds)
    noma = run_baseline(BaselineKind.MAX_GM, small, seeds)
    assert oma.delivery_rate <= noma.delivery_rate
    assert oma.norm_aoi >= noma.norm_aoi
