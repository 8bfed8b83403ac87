"""AoI-minimizing NOMA resource allocation for highway C-V2X: simulator, GM matching, DDPG and oracles."""

from .aoi import initial_aoi, normalized_aoi, reward, update_aoi
from .baselines import BaselineKind, run_baseline, run_baseline_episode
from .ddpg import AgentConfig, DDPGAgent, evaluate_policy, train
from .environment import EnvConfig, V2XEnv
from .matching import GmConfig, Matching, gm_match

__version__ = "0.1.0"

__all__ = [
    "AgentConfig", "BaselineKind", "DDPGAgent", "EnvConfig", "GmConfig", "Matching", "V2XEnv",
    "evaluate_policy", "gm_match", "initial_aoi", "normalized_aoi", "reward", "run_baseline",
    "run_baseline_episode", "train", "update_aoi",
]
