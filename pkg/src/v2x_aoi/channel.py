"""Link budget: WINNER+ B1 LOS pathloss, log-normal shadowing, Rayleigh fading.

Gains are returned already divided by the effective receiver noise power, so
``p * g`` is the interference-free SINR of a link.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mobility import VehicleState, distance_matrix

MIN_DISTANCE = 3.0


@dataclass(frozen=True)
class ChannelConfig:
    carrier_freq: float = 2.0  # GHz
    rb_bandwidth: float = 1e5  # Hz
    noise_power: float = -114.0  # dBm over one RB
    noise_figure: float = 9.0  # dB
    antenna_gain: float = 3.0  # dBi, per end
    shadowing_sigma: float = 3.0  # dB
    rayleigh: bool = True

    def __post_init__(self):
        if self.carrier_freq <= 0 or self.rb_bandwidth <= 0:
            raise ValueError("carrier_freq and rb_bandwidth must be positive")
        if self.shadowing_sigma < 0:
            raise ValueError("shadowing_sigma must be non-negative")

    @property
    def effective_noise(self) -> float:
        """Noise power in watts including the receiver noise figure."""
        return 10.0 ** ((self.noise_power - 30.0) / 10.0) * 10.0 ** (self.noise_figure / 10.0)


def pathloss_db(d, fc: float = 2.0):
    """WINNER+ B1 LOS pathloss below the breakpoint; ``d`` is clamped to 3 m."""
    d = np.maximum(np.asarray(d, dtype=float), MIN_DISTANCE)
    pl = 22.7 * np.log10(d) + 41.0 + 20.0 * np.log10(fc / 5.0)
    return float(pl) if pl.ndim == 0 else pl


def large_scale_gain(dist: np.ndarray, cfg: ChannelConfig, shadow_db: np.ndarray | float = 0.0) -> np.ndarray:
    """Noise-normalized linear gain without fast fading."""
    db = -pathloss_db(dist, cfg.carrier_freq) + 2.0 * cfg.antenna_gain + shadow_db
    return 10.0 ** (np.asarray(db) / 10.0) / cfg.effective_noise


def sample_gains(states: Sequence[VehicleState], cfg: ChannelConfig, rng: np.random.Generator,
                 slots: int = 4) -> np.ndarray:
    """Draw the (m, m, slots) gain tensor of one transmission period.

    Shadowing is symmetric and drawn once per pair; Rayleigh power is drawn per
    direction and per slot. Diagonal entries are zero.
    """
    m = len(states)
    if m < 2:
        raise ValueError("need at least two vehicles")
    dist = distance_matrix(states)
    shadow = rng.normal(0.0, 1.0, size=(m, m)) * cfg.shadowing_sigma
    shadow = np.triu(shadow, 1)
    shadow = shadow + shadow.T
    base = large_scale_gain(dist, cfg, shadow)
    if cfg.rayleigh:
        fading = rng.exponential(1.0, size=(m, m, slots))
    else:
        fading = np.ones((m, m, slots))
    g = base[:, :, None] * fading
    idx = np.arange(m)
    g[idx, idx, :] = 0.0
    return g
