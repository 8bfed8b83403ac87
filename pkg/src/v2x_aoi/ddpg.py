"""DDPG agent for per-vehicle coverage and power, trained on top of GM slots."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from .environment import V2XEnv, preprocess_action
from .neural import MLP, Adam, adam_step, actor_spec, critic_spec, load_checkpoint, save_checkpoint, soft_update

TRAILING_WINDOW = 50


@dataclass(frozen=True)
class AgentConfig:
    discount: float = 0.99
    tau: float = 1e-3
    actor_lr: float = 2e-4
    critic_lr: float = 1e-4
    buffer_capacity: int = 3_000_000
    batch_size: int = 64
    noise_scale: float = 0.1
    episodes: int = 1000
    hidden: tuple[int, ...] = (500, 300)
    actor_final_scale: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if not 0 < self.discount < 1:
            raise ValueError("discount must lie in (0, 1)")
        if not 0 < self.tau <= 1:
            raise ValueError("tau must lie in (0, 1]")
        if self.batch_size < 1 or self.buffer_capacity < 1:
            raise ValueError("batch_size and buffer_capacity must be positive")


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray


class ReplayBuffer:
    """FIFO ring buffer with uniform sampling; storage grows lazily up to capacity."""

    def __init__(self, capacity: int):
        self.capacity = int(capacity)
        self._items: list[Transition] = []
        self._next = 0

    def __len__(self):
        return len(self._items)

    def add(self, transition: Transition):
        if len(self._items) < self.capacity:
            self._items.append(transition)
        else:
            self._items[self._next] = transition
        self._next = (self._next + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        if not self._items:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, len(self._items), size=batch_size)
        return [self._items[i] for i in idx]


def select_action(actor: MLP, state: np.ndarray, noise_scale: float,
                  rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Actor output plus Gaussian exploration noise, clipped to [-1, 1]."""
    action = actor.forward(state)
    if noise_scale > 0:
        if rng is None:
            raise ValueError("exploration needs a random generator")
        action = action + rng.normal(0.0, noise_scale, size=action.shape)
    return np.clip(action, -1.0, 1.0)


def _stack(batch: list[Transition]):
    states = np.stack([t.state for t in batch])
    actions = np.stack([t.action for t in batch])
    rewards = np.array([t.reward for t in batch], dtype=float)
    next_states = np.stack([t.next_state for t in batch])
    return states, actions, rewards, next_states


class DDPGAgent:
    def __init__(self, state_size: int, action_size: int, config: AgentConfig = AgentConfig(),
                 seed: Optional[int] = None):
        self.config = config
        self.state_size, self.action_size = state_size, action_size
        self.rng = np.random.default_rng(seed)
        init_rng = np.random.default_rng(self.rng.integers(2**63))
        self.actor = MLP.init(actor_spec(state_size, action_size, config.hidden), init_rng,
                              final_scale=config.actor_final_scale)
        self.critic = MLP.init(critic_spec(state_size, action_size, config.hidden), init_rng)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.actor_opt = Adam([self.actor.flat], config.actor_lr)
        self.critic_opt = Adam([self.critic.flat], config.critic_lr)
        self.buffer = ReplayBuffer(config.buffer_capacity)

    def act(self, state: np.ndarray, explore: bool = True) -> np.ndarray:
        noise = self.config.noise_scale if explore else 0.0
        return select_action(self.actor, state, noise, self.rng)

    def critic_loss(self, batch: list[Transition]) -> float:
        s, a, r, s2 = _stack(batch)
        v = self._targets(r, s2)
        q = self.critic.forward(np.hstack([s, a]))[:, 0]
        return float(np.mean((v - q) ** 2))

    def _targets(self, rewards: np.ndarray, next_states: np.ndarray) -> np.ndarray:
        a2 = self.actor_target.forward(next_states)
        q2 = self.critic_target.forward(np.hstack([next_states, a2]))[:, 0]
        return rewards + self.config.discount * q2

    def critic_gradients(self, batch: list[Transition]):
        s, a, r, s2 = _stack(batch)
        v = self._targets(r, s2)
        q, cache = self.critic.forward_cache(np.hstack([s, a]))
        err = q[:, 0] - v
        loss = float(np.mean(err ** 2))
        upstream = (2.0 / len(batch)) * err[:, None]
        grads, _ = self.critic.backward(cache, upstream)
        return loss, grads

    def actor_gradients(self, states: np.ndarray):
        """Gradient of -mean Q(s, pi(s)) w.r.t. actor parameters, and the objective."""
        actions, actor_cache = self.actor.forward_cache(states)
        q, critic_cache = self.critic.forward_cache(np.hstack([states, actions]))
        batch = states.shape[0]
        _, dq_dinput = self.critic.backward(critic_cache, np.full((batch, 1), -1.0 / batch),
                                              param_grads=False)
        dq_da = dq_dinput[:, self.state_size:]
        grads, _ = self.actor.backward(actor_cache, dq_da)
        return float(q.mean()), grads

    def train_step(self, batch: list[Transition]) -> dict:
        if not batch:
            raise ValueError("empty batch")
        loss, critic_grads = self.critic_gradients(batch)
        adam_step(self.critic, critic_grads, self.critic_opt)
        states = np.stack([t.state for t in batch])
        q_mean, actor_grads = self.actor_gradients(states)
        adam_step(self.actor, actor_grads, self.actor_opt)
        soft_update(self.critic_target, self.critic, self.config.tau)
        soft_update(self.actor_target, self.actor, self.config.tau)
        return {"critic_loss": loss, "q_mean": q_mean}

    def save(self, path: Union[str, Path], meta: Optional[dict] = None):
        meta = dict(meta or {})
        meta.update(state_size=self.state_size, action_size=self.action_size)
        save_checkpoint(
            path,
            {"actor": self.actor, "critic": self.critic,
             "actor_target": self.actor_target, "critic_target": self.critic_target},
            {"actor": self.actor_opt, "critic": self.critic_opt},
            meta,
        )

    @classmethod
    def load(cls, path: Union[str, Path], config: AgentConfig = AgentConfig(),
             seed: Optional[int] = None) -> "DDPGAgent":
        nets, opts, meta = load_checkpoint(path)
        agent = cls.__new__(cls)
        agent.config = config
        agent.state_size, agent.action_size = meta["state_size"], meta["action_size"]
        agent.rng = np.random.default_rng(seed)
        agent.actor, agent.critic = nets["actor"], nets["critic"]
        agent.actor_target, agent.critic_target = nets["actor_target"], nets["critic_target"]
        agent.actor_opt, agent.critic_opt = opts["actor"], opts["critic"]
        agent.buffer = ReplayBuffer(config.buffer_capacity)
        return agent


@dataclass
class RewardCurve:
    episode_rewards: list[float] = field(default_factory=list)

    def trailing_mean(self, episode: int) -> Optional[float]:
        """Mean over episodes e-49..e (1-based); None before episode 50."""
        if episode < TRAILING_WINDOW:
            return None
        window = self.episode_rewards[episode - TRAILING_WINDOW:episode]
        return float(np.mean(window))

    def rows(self):
        for e in range(1, len(self.episode_rewards) + 1):
            yield e, self.episode_rewards[e - 1], self.trailing_mean(e)


def train(env: V2XEnv, agent: DDPGAgent, episodes: Optional[int] = None, seed: int = 0,
          callback: Optional[Callable[[int, float], None]] = None) -> tuple[DDPGAgent, RewardCurve]:
    """Run ``episodes`` training episodes; episode ``e`` resets the env with ``seed + e``."""
    episodes = agent.config.episodes if episodes is None else episodes
    curve = RewardCurve()
    batch_size = agent.config.batch_size
    for e in range(episodes):
        state = env.reset(seed + e)
        total = 0.0
        while not env.done:
            action = agent.act(state, explore=True)
            next_state, r, _ = env.step(action)
            total += r
            agent.buffer.add(Transition(state, action, r, next_state))
            if len(agent.buffer) >= batch_size:
                agent.train_step(agent.buffer.sample(batch_size, agent.rng))
            state = next_state
        curve.episode_rewards.append(total)
        if callback is not None:
            callback(e + 1, total)
    return agent, curve


def evaluate_policy(env: V2XEnv, agent: DDPGAgent, seeds) -> dict:
    """Noise-free rollouts, one episode per seed."""
    aois, rates, rewards = [], [], []
    for s in seeds:
        state = env.reset(int(s))
        while not env.done:
            state, _, _ = env.step(agent.act(state, explore=False))
        aois.append(env.normalized_aoi())
        rates.append(env.delivery_rate())
        rewards.append(float(sum(env.rewards)))
    return {"norm_aoi": float(np.mean(aois)), "delivery_rate": float(np.mean(rates)),
            "episode_reward": float(np.mean(rewards))}


__all__ = ["AgentConfig", "Transition", "ReplayBuffer", "DDPGAgent", "RewardCurve",
           "select_action", "preprocess_action", "train", "evaluate_policy"]
