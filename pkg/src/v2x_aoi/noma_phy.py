"""Per-period delivery evaluation under NOMA with SIC and half-duplex radios."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .matching import Matching
from .mobility import VehicleState, distance_matrix


@dataclass
class PeriodAllocation:
    """Schedule, coverage radii, powers and packet sizes for one period.

    ``schedule`` is a boolean (m, k) matrix; GM schedules produce one slot per
    row, but the evaluation accepts any number of slots per vehicle.
    """

    schedule: np.ndarray
    coverage: np.ndarray
    power: np.ndarray
    packet_sizes: np.ndarray

    def __post_init__(self):
        self.schedule = np.asarray(self.schedule, dtype=bool)
        self.coverage = np.asarray(self.coverage, dtype=float)
        self.power = np.asarray(self.power, dtype=float)
        self.packet_sizes = np.broadcast_to(np.asarray(self.packet_sizes, dtype=float),
                                            self.coverage.shape).copy()
        m = self.schedule.shape[0]
        if self.coverage.shape != (m,) or self.power.shape != (m,):
            raise ValueError("coverage and power must be m-vectors")

    @classmethod
    def from_matching(cls, matching: Matching, coverage, power, packet_sizes) -> "PeriodAllocation":
        return cls(matching.schedule(), coverage, power, packet_sizes)

    @property
    def vehicles(self) -> int:
        return self.schedule.shape[0]

    @property
    def slots(self) -> int:
        return self.schedule.shape[1]

    def check(self, max_coverage: float, max_power: float, max_group: Optional[int] = None):
        if np.any(self.coverage < 0) or np.any(self.coverage > max_coverage):
            raise ValueError("coverage outside [0, max_coverage]")
        if np.any(self.power < 0) or np.any(self.power > max_power):
            raise ValueError("power outside [0, max_power]")
        if max_group is not None and np.any(self.schedule.sum(axis=0) > max_group):
            raise ValueError("slot group exceeds max_group")


def _dist(states_or_dist) -> np.ndarray:
    if isinstance(states_or_dist, np.ndarray):
        return states_or_dist
    return distance_matrix(states_or_dist)


def neighbor_set(states_or_dist, i: int, r_i: float) -> set[int]:
    dist = _dist(states_or_dist)
    return {j for j in range(dist.shape[0]) if j != i and dist[i, j] <= r_i}


def interference_set(i: int, j: int, s: int, alloc: PeriodAllocation, gains: np.ndarray,
                     states_or_dist) -> set[int]:
    """Co-slot transmitters covering ``j`` whose gain at ``j`` is below that of ``i``.

    Stronger co-slot signals are removed by SIC before ``i`` is decoded.
    """
    dist = _dist(states_or_dist)
    out = set()
    for ip in range(alloc.vehicles):
        if ip == i or not alloc.schedule[ip, s]:
            continue
        if dist[ip, j] <= alloc.coverage[ip] and gains[i, j, s] > gains[ip, j, s]:
            out.add(ip)
    return out


def sinr(p_i: float, g_ij: float, interferers: Iterable[tuple[float, float]] = ()) -> float:
    interference = sum(p * g for p, g in interferers)
    return p_i * g_ij / (1.0 + interference)


def slot_rate(gamma, bandwidth: float = 1e5, slot_duration: float = 0.025):
    """Bits deliverable in one slot at SINR ``gamma``."""
    return bandwidth * slot_duration * np.log2(1.0 + np.asarray(gamma))


def link_rates(alloc: PeriodAllocation, gains: np.ndarray, dist: np.ndarray,
               bandwidth: float = 1e5, slot_duration: float = 0.025) -> np.ndarray:
    """(m, m, k) rate of link i->j in slot s; zero where i is silent or j transmits."""
    y = alloc.schedule
    m, k = y.shape
    cover = dist <= alloc.coverage[:, None]
    np.fill_diagonal(cover, False)
    rates = np.zeros((m, m, k))
    for s in range(k):
        g = gains[:, :, s]
        # received power at j from i' when i' is scheduled in s and covers j
        rx = np.where(y[:, s][:, None] & cover, alloc.power[:, None] * g, 0.0)
        # weaker[i, i', j]: g[i', j] < g[i, j], i.e. i' is decoded after i
        weaker = (g[None, :, :] < g[:, None, :]).astype(float)
        interference = np.einsum("abj,bj->aj", weaker, rx)
        gamma = alloc.power[:, None] * g / (1.0 + interference)
        usable = y[:, s][:, None] & ~y[:, s][None, :]
        rates[:, :, s] = np.where(usable, slot_rate(gamma, bandwidth, slot_duration), 0.0)
    return rates


def evaluate_deliveries(alloc: PeriodAllocation, gains: np.ndarray, states_or_dist,
                        bandwidth: float = 1e5, slot_duration: float = 0.025) -> np.ndarray:
    """Binary (m, m) matrix: x[i, j] = 1 iff j decodes i's packet this period."""
    dist = _dist(states_or_dist)
    y = alloc.schedule
    m = y.shape[0]
    rates = link_rates(alloc, gains, dist, bandwidth, slot_duration)
    # some slot where i transmits while j listens
    listening = (y[:, None, :] & ~y[None, :, :]).any(axis=2)
    cover = dist <= alloc.coverage[:, None]
    total = rates.sum(axis=2)
    x = listening & cover & (total >= alloc.packet_sizes[:, None])
    x[np.arange(m), np.arange(m)] = False
    return x.astype(np.int8)
