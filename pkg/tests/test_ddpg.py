import numpy as np
import pytest
from scipy.stats import chisquare

from v2x_aoi.checks import composed_gradient_error
from v2x_aoi.ddpg import (AgentConfig, DDPGAgent, ReplayBuffer, RewardCurve, Transition, evaluate_policy,
                          select_action, train)
from v2x_aoi.environment import EnvConfig, V2XEnv
from v2x_aoi.neural import MLP, MlpSpec


def transition(i, size=3):
    return Transition(np.full(size, float(i)), np.zeros(2), float(i), np.full(size, i + 1.0))


def test_config_defaults_and_validation():
    cfg = AgentConfig()
    assert (cfg.discount, cfg.tau, cfg.actor_lr, cfg.critic_lr) == (0.99, 1e-3, 2e-4, 1e-4)
    assert (cfg.buffer_capacity, cfg.batch_size, cfg.noise_scale, cfg.episodes) == (3_000_000, 64, 0.1, 1000)
    for bad in ({"discount": 1.0}, {"tau": 0.0}, {"batch_size": 0}):
        with pytest.raises(ValueError):
            AgentConfig(**bad)


def test_buffer_fifo_eviction():
    buf = ReplayBuffer(5)
    for i in range(12):
        buf.add(transition(i))
        assert len(buf) <= 5
    assert sorted(t.reward for t in buf._items) == [7.0, 8.0, 9.0, 10.0, 11.0]


def test_buffer_sampling_uniform(rng):
    buf = ReplayBuffer(20)
    for i in range(20):
        buf.add(transition(i))
    draws = [t.reward for _ in range(500) for t in buf.sample(20, rng)]
    counts = np.bincount(np.array(draws, dtype=int), minlength=20)
    assert chisquare(counts).pvalue > 1e-3


def test_empty_buffer_sample_raises(rng):
    with pytest.raises(ValueError):
        ReplayBuffer(3).sample(1, rng)


def test_select_action_examples(rng):
    zero = MLP.zeros(MlpSpec((4, 5, 6)))
    np.testing.assert_array_equal(select_action(zero, np.ones(4), 0.0), np.zeros(6))
    noisy = select_action(zero, np.ones(4), 5.0, rng)
    assert np.all(np.abs(noisy) <= 1.0)
    a1 = select_action(zero, np.ones(4), 0.1, np.random.default_rng(3))
    a2 = select_action(zero, np.ones(4), 0.1, np.random.default_rng(3))
    np.testing.assert_array_equal(a1, a2)
    with pytest.raises(ValueError):
        select_action(zero, np.ones(4), 0.1, None)


def test_policy_deterministic_without_noise(rng):
    agent = DDPGAgent(6, 4, AgentConfig(hidden=(8, 8)), seed=0)
    s = rng.normal(size=6)
    np.testing.assert_array_equal(agent.act(s, explore=False), agent.act(s, explore=False))


def test_actor_gradient_through_critic(rng):
    for _ in range(5):
        assert composed_gradient_error(rng) < 1e-3


def _batch(rng, n, state_size=4, action_size=2, reward=None):
    return [Transition(rng.normal(size=state_size), rng.uniform(-1, 1, action_size),
                       float(rng.normal()) if reward is None else reward,
                       rng.normal(size=state_size)) for _ in range(n)]


def test_train_step_decreases_critic_loss():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        agent = DDPGAgent(4, 2, AgentConfig(hidden=(16, 16), critic_lr=1e-4), seed=seed)
        batch = _batch(rng, 32)
        before = agent.critic_loss(batch)
        agent.train_step(batch)
        assert agent.critic_loss(batch) < before


def test_zero_discount_critic_fits_constant_reward(rng):
    agent = DDPGAgent(3, 2, AgentConfig(hidden=(16, 16), discount=1e-9, critic_lr=1e-2, actor_lr=1e-6), seed=1)
    batch = _batch(rng, 32, 3, 2, reward=1.0)
    for _ in range(600):
        agent.train_step(batch)
    q = agent.critic.forward(np.stack([np.hstack([t.state, t.action]) for t in batch]))
    np.testing.assert_allclose(q, 1.0, atol=0.05)


def test_targets_are_geometric_average(rng):
    agent = DDPGAgent(3, 2, AgentConfig(hidden=(4, 4), tau=0.1), seed=2)
    start = agent.critic_target.flat.copy()
    history = []
    for _ in range(5):
        agent.train_step(_batch(rng, 8, 3, 2))
        history.append(agent.critic.flat.copy())
    expected = start.copy()
    for online in history:
        expected = 0.1 * online + 0.9 * expected
    np.testing.assert_allclose(agent.critic_target.flat, expected, rtol=1e-12, atol=1e-15)


def test_trailing_mean():
    curve = RewardCurve(list(map(float, range(1, 61))))
    assert curve.trailing_mean(49) is None
    assert curve.trailing_mean(50) == pytest.approx(25.5)
    assert curve.trailing_mean(60) == pytest.approx(np.mean(range(11, 61)))
    rows = list(curve.rows())
    assert rows[0] == (1, 1.0, None) and rows[-1][0] == 60


def test_save_load_round_trip(tmp_path, rng):
    agent = DDPGAgent(5, 4, AgentConfig(hidden=(6, 6)), seed=4)
    agent.train_step(_batch(rng, 8, 5, 4))
    agent.save(tmp_path / "agent.npz", meta={"x": 1})
    back = DDPGAgent.load(tmp_path / "agent.npz", AgentConfig(hidden=(6, 6)))
    for name in ("actor", "critic", "actor_target", "critic_target"):
        np.testing.assert_array_equal(getattr(back, name).flat, getattr(agent, name).flat)
    assert back.critic_opt.t == agent.critic_opt.t == 1
    s = rng.normal(size=5)
    np.testing.assert_array_equal(back.act(s, explore=False), agent.act(s, explore=False))


def test_short_training_run_shapes_and_bounds():
    cfg = EnvConfig.create(3, periods=8)
    env = V2XEnv(cfg)
    agent = DDPGAgent(cfg.state_size, cfg.action_size, AgentConfig(hidden=(16, 16), batch_size=4), seed=0)
    seen = []
    agent, curve = train(env, agent, 3, seed=5, callback=lambda e, r: seen.append(e))
    assert seen == [1, 2, 3]
    assert len(agent.buffer) == 3 * 7
    m, steps = 3, 7
    for r in curve.episode_rewards:
        assert -steps <= r <= steps * (m * m - 2 * m) / (m * m)
    assert agent.critic_opt.t == 3 * 7 - 3


def test_training_is_reproducible():
    cfg = EnvConfig.create(3, periods=6)

    def run():
        agent = DDPGAgent(cfg.state_size, cfg.action_size, AgentConfig(hidden=(8, 8), batch_size=4), seed=9)
        agent, curve = train(V2XEnv(cfg), agent, 2, seed=1)
        return curve.episode_rewards, agent.actor.flat.copy(), evaluate_policy(V2XEnv(cfg), agent, [3, 4])

    r1, w1, e1 = run()
    r2, w2, e2 = run()
    assert r1 == r2 and e1 == e2
    np.testing.assert_array_equal(w1, w2)
