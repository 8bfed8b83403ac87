"""MAX-GM, RND-GM and OMA-GM benchmark policies.

All three draw coverages uniformly in [0, c_max] every period and keep GM for
slot assignment. OMA-GM additionally caps every slot at one transmitter.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .environment import EnvConfig, V2XEnv


class BaselineKind(str, enum.Enum):
    MAX_GM = "MAX-GM"
    RND_GM = "RND-GM"
    OMA_GM = "OMA-GM"


def baseline_env_config(kind: BaselineKind, config: EnvConfig) -> EnvConfig:
    kind = BaselineKind(kind)
    if kind is BaselineKind.OMA_GM:
        return config.replace(gm=dataclasses.replace(config.gm, max_group=1))
    return config


def baseline_action(kind: BaselineKind, config: EnvConfig, rng: np.random.Generator
                    ) -> tuple[np.ndarray, np.ndarray, Optional[int]]:
    """(coverage, power, max_group override) for one period."""
    kind = BaselineKind(kind)
    m = config.vehicles
    coverage = rng.uniform(0.0, config.max_coverage, size=m)
    if kind is BaselineKind.RND_GM:
        power = rng.uniform(0.0, config.max_power, size=m)
    else:
        power = np.full(m, config.max_power)
    return coverage, power, (1 if kind is BaselineKind.OMA_GM else None)


@dataclass
class EpisodeMetrics:
    norm_aoi: float
    delivery_rate: float
    episode_reward: float


def run_baseline_episode(kind: BaselineKind, config: EnvConfig, seed: int) -> EpisodeMetrics:
    env = V2XEnv(baseline_env_config(kind, config))
    env.reset(seed)
    rng = np.random.default_rng([seed, 7919])
    while not env.done:
        coverage, power, _ = baseline_action(kind, config, rng)
        env.step_allocation(coverage, power)
    return EpisodeMetrics(env.normalized_aoi(), env.delivery_rate(), float(sum(env.rewards)))


def run_baseline(kind: BaselineKind, config: EnvConfig, seeds: Sequence[int]) -> EpisodeMetrics:
    """Average of independent n-period episodes, one per seed."""
    runs = [run_baseline_episode(kind, config, int(s)) for s in seeds]
    return EpisodeMetrics(
        float(np.mean([r.norm_aoi for r in runs])),
        float(np.mean([r.delivery_rate for r in runs])),
        float(np.mean([r.episode_reward for r in runs])),
    )
