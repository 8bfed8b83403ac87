"""Six-lane bidirectional highway: vehicle drop and constant-speed kinematics."""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

KMH_TO_MS = 1000.0 / 3600.0


class CapacityError(ValueError):
    """Raised when the requested vehicle count cannot be placed on the road."""


class Direction(str, enum.Enum):
    FORWARD = "forward"  # right to left, decreasing longitudinal position
    BACKWARD = "backward"


def _default_forward() -> tuple[float, ...]:
    return tuple(60.0 + 2 * i * 10.0 for i in range(3))


def _default_backward() -> tuple[float, ...]:
    return tuple(100.0 - 2 * i * 10.0 for i in range(3))


@dataclass(frozen=True)
class HighwayConfig:
    vehicle_count: int = 4
    road_length: float = 2000.0
    lane_width: float = 4.0
    lanes_per_direction: int = 3
    forward_speeds_kmh: tuple[float, ...] = field(default_factory=_default_forward)
    backward_speeds_kmh: tuple[float, ...] = field(default_factory=_default_backward)
    spacing_factor: float = 2.5

    def __post_init__(self):
        object.__setattr__(self, "forward_speeds_kmh", tuple(float(v) for v in self.forward_speeds_kmh))
        object.__setattr__(self, "backward_speeds_kmh", tuple(float(v) for v in self.backward_speeds_kmh))
        if self.road_length <= 0 or self.lane_width <= 0:
            raise ValueError("road_length and lane_width must be positive")
        if self.lanes_per_direction < 1:
            raise ValueError("lanes_per_direction must be >= 1")
        if self.vehicle_count < 1:
            raise ValueError("vehicle_count must be >= 1")
        if (len(self.forward_speeds_kmh) != self.lanes_per_direction
                or len(self.backward_speeds_kmh) != self.lanes_per_direction):
            raise ValueError("one speed per lane and direction is required")
        if min(self.forward_speeds_kmh + self.backward_speeds_kmh) <= 0:
            raise ValueError("lane speeds must be positive")

    @classmethod
    def from_speed_group(cls, speeds_kmh: Sequence[float], **kwargs) -> "HighwayConfig":
        """Build from one speed per lane, forward lanes first (top to bottom)."""
        speeds = [float(v) for v in speeds_kmh]
        if len(speeds) % 2:
            raise ValueError("speed group needs an even number of lanes")
        half = len(speeds) // 2
        return cls(lanes_per_direction=half, forward_speeds_kmh=tuple(speeds[:half]),
                   backward_speeds_kmh=tuple(speeds[half:]), **kwargs)

    @property
    def lane_count(self) -> int:
        return 2 * self.lanes_per_direction

    @property
    def road_width(self) -> float:
        return self.lane_count * self.lane_width

    @property
    def max_speed(self) -> float:
        """Largest lane speed in m/s."""
        return max(self.forward_speeds_kmh + self.backward_speeds_kmh) * KMH_TO_MS

    def lane_speed(self, lane: int) -> float:
        """Speed in m/s of global lane index (forward lanes 0..L-1, then backward)."""
        speeds = self.forward_speeds_kmh + self.backward_speeds_kmh
        return speeds[lane] * KMH_TO_MS

    def lane_direction(self, lane: int) -> Direction:
        return Direction.FORWARD if lane < self.lanes_per_direction else Direction.BACKWARD

    def lane_center(self, lane: int) -> float:
        # forward lanes occupy the upper half of the cross-section
        return self.road_width - (lane + 0.5) * self.lane_width

    def mean_gap(self, lane: int) -> float:
        return self.spacing_factor * self.lane_speed(lane)

    def capacity(self) -> int:
        """Vehicles that fit when every lane is packed at its mean spacing."""
        return sum(int(self.road_length // self.mean_gap(lane)) for lane in range(self.lane_count))


@dataclass(frozen=True)
class VehicleState:
    id: int
    longitudinal_pos: float
    lateral_pos: float
    speed: float
    direction: Direction
    lane: int

    def __post_init__(self):
        if self.speed <= 0:
            raise ValueError("speed must be positive")

    @property
    def velocity(self) -> float:
        """Signed longitudinal velocity in m/s."""
        return -self.speed if self.direction is Direction.FORWARD else self.speed


def spawn_vehicles(config: HighwayConfig, rng: np.random.Generator,
                   max_attempts: int = 10_000) -> list[VehicleState]:
    """Drop exactly ``config.vehicle_count`` vehicles.

    Lanes are drawn uniformly per vehicle. Inside a lane the first vehicle sits
    at a uniform offset and the following ones trail it with exponential gaps of
    mean ``spacing_factor * lane speed``. A draw whose lane span does not fit on
    the road is rejected and redrawn.
    """
    m = config.vehicle_count
    if m > config.capacity():
        raise CapacityError(
            f"{m} vehicles exceed the road capacity of {config.capacity()} at mean spacing")
    length = config.road_length
    for _ in range(max_attempts):
        lanes = rng.integers(0, config.lane_count, size=m)
        positions = np.empty(m)
        ok = True
        for lane in range(config.lane_count):
            members = np.flatnonzero(lanes == lane)
            if members.size == 0:
                continue
            start = rng.uniform(0.0, length)
            gaps = rng.exponential(config.mean_gap(lane), size=members.size - 1)
            if gaps.sum() >= length:
                ok = False
                break
            offsets = np.concatenate([[0.0], np.cumsum(gaps)])
            positions[members] = np.mod(start + offsets, length)
        if ok:
            return [
                VehicleState(
                    id=i,
                    longitudinal_pos=float(positions[i]) % length,
                    lateral_pos=config.lane_center(int(lanes[i])),
                    speed=config.lane_speed(int(lanes[i])),
                    direction=config.lane_direction(int(lanes[i])),
                    lane=int(lanes[i]),
                )
                for i in range(m)
            ]
    raise CapacityError(f"could not place {m} vehicles in {max_attempts} attempts")


def advance_positions(states: Sequence[VehicleState], dt: float,
                      road_length: float = 2000.0) -> list[VehicleState]:
    """Move every vehicle by ``dt`` seconds; positions wrap around the road."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if dt == 0:
        return list(states)
    out = []
    for s in states:
        pos = (s.longitudinal_pos + s.velocity * dt) % road_length
        if pos >= road_length:  # float rounding of tiny negative values
            pos = 0.0
        out.append(dataclasses.replace(s, longitudinal_pos=pos))
    return out


def distance(a: VehicleState, b: VehicleState) -> float:
    return float(np.hypot(a.longitudinal_pos - b.longitudinal_pos, a.lateral_pos - b.lateral_pos))


def positions(states: Sequence[VehicleState]) -> np.ndarray:
    """(m, 2) array of (longitudinal, lateral) coordinates."""
    return np.array([[s.longitudinal_pos, s.lateral_pos] for s in states], dtype=float).reshape(-1, 2)


def distance_matrix(states: Sequence[VehicleState]) -> np.ndarray:
    xy = positions(states)
    diff = xy[:, None, :] - xy[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])
