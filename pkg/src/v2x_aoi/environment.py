"""Single-agent MDP: one step is one transmission period.

State layout (frozen; checkpoints depend on it), for m vehicles and k slots:

    gains            m*m*k   10*log10(g) / 100, diagonal 0
    sinr_max_power   m*m*k   10*log10(1 + p_max*g) / 100
    aoi              m*m     AoI / n
    matching         m*k     one-hot GM slot
    power_share      m*k     previous power / p_max on the previous slot
    cross_influence  m*k     signed log1p squash of Q_i^(s)
    position         2*m     x / road_length, y / road_width
    speed            m       signed velocity / max speed
    coverage         m       current coverage / c_max
    extras           2       t / n, fraction of matched vehicles

Total length 2*m^2*k + m^2 + 3*m*k + 4*m + 2.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import aoi as aoi_mod
from .channel import ChannelConfig, sample_gains
from .matching import GmConfig, Matching, avg_cross_influence, gm_match
from .mobility import HighwayConfig, VehicleState, advance_positions, distance_matrix, spawn_vehicles
from .noma_phy import PeriodAllocation, evaluate_deliveries

BITS_PER_KB = 8000


class EpisodeDone(RuntimeError):
    pass


@dataclass(frozen=True)
class EnvConfig:
    highway: HighwayConfig = field(default_factory=HighwayConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    gm: Optional[GmConfig] = None  # radius defaults to max_coverage
    slots: int = 4
    periods: int = 200
    slot_duration: float = 0.025
    period_duration: float = 0.1
    max_coverage: float = 200.0
    max_power: float = 1.0
    packet_size_kb: Union[float, tuple[float, float]] = 3.0

    def __post_init__(self):
        if self.gm is None:
            object.__setattr__(self, "gm", GmConfig(radius=self.max_coverage))
        if isinstance(self.packet_size_kb, list):
            object.__setattr__(self, "packet_size_kb", tuple(self.packet_size_kb))
        if self.slots * self.slot_duration > self.period_duration + 1e-12:
            raise ValueError("slots do not fit in one transmission period")
        if self.periods < 2:
            raise ValueError("need at least two periods")
        if self.slots < 1 or self.max_coverage < 0 or self.max_power < 0:
            raise ValueError("invalid slot count, coverage or power bound")

    @classmethod
    def create(cls, vehicles: int = 4, **kwargs) -> "EnvConfig":
        highway = kwargs.pop("highway", None) or HighwayConfig(vehicle_count=vehicles)
        if highway.vehicle_count != vehicles:
            highway = dataclasses.replace(highway, vehicle_count=vehicles)
        return cls(highway=highway, **kwargs)

    @property
    def vehicles(self) -> int:
        return self.highway.vehicle_count

    @property
    def state_size(self) -> int:
        return state_size(self.vehicles, self.slots)

    @property
    def action_size(self) -> int:
        return 2 * self.vehicles

    def replace(self, **changes) -> "EnvConfig":
        return dataclasses.replace(self, **changes)


def state_size(m: int, k: int) -> int:
    return 2 * m * m * k + m * m + 3 * m * k + 4 * m + 2


def preprocess_action(raw: np.ndarray, max_coverage: float, max_power: float) -> tuple[np.ndarray, np.ndarray]:
    """Map a raw action in [-1, 1]^(2m) to (coverage, power) m-vectors."""
    raw = np.clip(np.asarray(raw, dtype=float), -1.0, 1.0)
    coverage = (raw[0::2] + 1.0) / 2.0 * max_coverage
    power = (raw[1::2] + 1.0) / 2.0 * max_power
    return coverage, power


class V2XEnv:
    """Highway C-V2X environment wiring mobility, channel, GM, PHY and AoI."""

    def __init__(self, config: EnvConfig, seed: Optional[int] = None):
        self.config = config
        self._seed = seed
        self.t = 0
        self.states: list[VehicleState] = []
        self.gains: Optional[np.ndarray] = None
        self.matching: Optional[Matching] = None
        self.aoi: Optional[np.ndarray] = None
        self.aoi_history: list[np.ndarray] = []
        self.deliveries: list[np.ndarray] = []
        self.rewards: list[float] = []

    @property
    def m(self) -> int:
        return self.config.vehicles

    @property
    def done(self) -> bool:
        return self.t >= self.config.periods

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        if seed is None:
            seed = self._seed
        streams = np.random.SeedSequence(seed).spawn(4)
        self._mobility_rng, self._channel_rng, self._gm_rng, self._packet_rng = (
            np.random.default_rng(s) for s in streams)
        cfg = self.config
        m, k = self.m, cfg.slots
        self.states = spawn_vehicles(cfg.highway, self._mobility_rng)
        self.t = 1
        self.aoi = aoi_mod.initial_aoi(m)
        self.aoi_history = [self.aoi]
        self.deliveries = []
        self.rewards = []
        self.coverage = np.zeros(m)
        self.power_share = np.zeros((m, k))
        self._observe_period()
        return self.encode_state()

    def _observe_period(self):
        cfg = self.config
        self.dist = distance_matrix(self.states)
        self.gains = sample_gains(self.states, cfg.channel, self._channel_rng, cfg.slots)
        self.matching = gm_match(self.dist, cfg.slots, cfg.gm, self._gm_rng)
        self.packet_bits = self._draw_packets()

    def _draw_packets(self) -> np.ndarray:
        size = self.config.packet_size_kb
        if isinstance(size, tuple):
            lo, hi = size
            return self._packet_rng.uniform(lo, hi, size=self.m) * BITS_PER_KB
        return np.full(self.m, float(size) * BITS_PER_KB)

    def encode_state(self) -> np.ndarray:
        cfg = self.config
        m, k, n = self.m, cfg.slots, cfg.periods
        g = self.gains
        off = ~np.eye(m, dtype=bool)[:, :, None]
        with np.errstate(divide="ignore"):
            gain_db = np.where(off, 10.0 * np.log10(np.maximum(g, 1e-30)), 0.0)
        sinr_db = np.where(off, 10.0 * np.log10(1.0 + cfg.max_power * g), 0.0)
        onehot = self.matching.schedule().astype(float)
        q_scale = np.log1p((2.0 * cfg.gm.radius) ** 2)
        q = np.zeros((m, k))
        for i in range(m):
            for s in range(k):
                val = avg_cross_influence(i, s, self.matching, self.dist, cfg.gm)
                q[i, s] = np.sign(val) * np.log1p(abs(val)) / q_scale
        pos = np.array([[st.longitudinal_pos / cfg.highway.road_length,
                         st.lateral_pos / cfg.highway.road_width] for st in self.states])
        speed = np.array([st.velocity for st in self.states]) / cfg.highway.max_speed
        cover = self.coverage / cfg.max_coverage if cfg.max_coverage > 0 else np.zeros(m)
        extras = np.array([self.t / n, len(self.matching.matched()) / m])
        return np.concatenate([
            gain_db.ravel() / 100.0,
            sinr_db.ravel() / 100.0,
            (self.aoi / n).ravel(),
            onehot.ravel(),
            self.power_share.ravel(),
            q.ravel(),
            pos.ravel(),
            speed,
            cover,
            extras,
        ])

    def step(self, action: np.ndarray) -> tuple[np.ndarray, float, bool]:
        action = np.asarray(action, dtype=float)
        if action.shape != (2 * self.m,):
            raise ValueError(f"action must have length {2 * self.m}")
        coverage, power = preprocess_action(action, self.config.max_coverage, self.config.max_power)
        return self.step_allocation(coverage, power)

    def current_allocation(self, coverage, power) -> PeriodAllocation:
        return PeriodAllocation.from_matching(self.matching, coverage, power, self.packet_bits)

    def step_allocation(self, coverage, power) -> tuple[np.ndarray, float, bool]:
        if self.done:
            raise EpisodeDone("step called on a finished episode")
        cfg = self.config
        alloc = self.current_allocation(coverage, power)
        x = evaluate_deliveries(alloc, self.gains, self.dist, cfg.channel.rb_bandwidth, cfg.slot_duration)
        r = aoi_mod.reward(x, self.m)
        self.deliveries.append(x)
        self.rewards.append(r)
        self.aoi = aoi_mod.update_aoi(self.aoi, x, cfg.periods)
        self.aoi_history.append(self.aoi)
        self.coverage = np.asarray(coverage, dtype=float).copy()
        share = cfg.max_power if cfg.max_power > 0 else 1.0
        self.power_share = alloc.schedule * (np.asarray(power, dtype=float)[:, None] / share)
        self.states = advance_positions(self.states, cfg.period_duration, cfg.highway.road_length)
        self.t += 1
        self._observe_period()
        return self.encode_state(), r, self.done

    def normalized_aoi(self) -> float:
        return aoi_mod.normalized_aoi(self.aoi_history, self.config.periods)

    def delivery_rate(self) -> float:
        if not self.deliveries:
            return 0.0
        m = self.m
        return float(np.sum(self.deliveries) / (len(self.deliveries) * m * (m - 1)))
