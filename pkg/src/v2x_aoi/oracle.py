"""Brute-force references for tiny instances.

Everything here is written with plain loops and deliberately avoids the
vectorized code paths in ``noma_phy`` and ``matching`` so the two can be
checked against each other.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

MAX_PRIME_VERTICES = 6
MAX_PRIME_SLOTS = 10
MAX_MIS_VERTICES = 16
MAX_VAMP_VEHICLES = 4
MAX_VAMP_SLOTS = 3
MAX_VAMP_PERIODS = 3
MAX_GRID_LEVELS = 4


class DegenerateInstanceError(ValueError):
    pass


class InstanceTooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices 0..n-1."""

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        norm = []
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError("self-loops are not allowed")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) out of range")
            norm.append((min(u, v), max(u, v)))
        if len(set(norm)) != len(norm):
            raise ValueError("duplicate edge")
        object.__setattr__(self, "edges", tuple(norm))

    def degree(self, v: int) -> int:
        return sum(v in e for e in self.edges)

    def adjacent(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self.edges


def all_graphs(n: int):
    """Every labeled simple graph on ``n`` vertices."""
    pairs = list(itertools.combinations(range(n), 2))
    for mask in range(1 << len(pairs)):
        yield Graph(n, tuple(p for b, p in enumerate(pairs) if mask >> b & 1))


@dataclass(frozen=True)
class VampPrimeInstance:
    """Two-period OMA restriction built from a graph.

    Vehicles 0..l-1 are the graph vertices and vehicle ``l`` is the sink.
    ``coefficient[i][s]`` is the unit channel from vehicle ``i`` to the sink in
    slot ``s`` (one slot per edge), and ``packet_sizes[i]`` equals the degree.
    """

    vertices: int
    coefficient: tuple[tuple[int, ...], ...]
    packet_sizes: tuple[int, ...]
    max_group: int = 1

    @property
    def vehicles(self) -> int:
        return self.vertices + 1

    @property
    def sink(self) -> int:
        return self.vertices

    @property
    def slots(self) -> int:
        return len(self.coefficient[0]) if self.coefficient else 0


def reduce_mis(graph: Graph) -> VampPrimeInstance:
    if not graph.edges:
        raise DegenerateInstanceError("the reduction needs at least one edge")
    coeff = tuple(tuple(int(v in e) for e in graph.edges) for v in range(graph.n))
    sizes = tuple(graph.degree(v) for v in range(graph.n))
    return VampPrimeInstance(graph.n, coeff, sizes, max_group=1)


def brute_force_vamp_prime(instance: VampPrimeInstance) -> int:
    """Maximum number of packets the sink can receive in the first period.

    Each slot hosts at most one transmitter (OMA). Giving a slot to a vehicle
    with zero coefficient there adds no rate and only blocks the slot, so each
    slot ranges over its incident vehicles plus "idle". Degree-zero vertices
    need no rate and are counted as delivered without occupying a slot.
    """
    if instance.vertices > MAX_PRIME_VERTICES or instance.slots > MAX_PRIME_SLOTS:
        raise InstanceTooLargeError("instance exceeds the enumeration bound")
    l, k = instance.vertices, instance.slots
    coeff, sizes = instance.coefficient, instance.packet_sizes
    free = sum(1 for v in range(l) if sizes[v] == 0)
    options = [[None] + [v for v in range(l) if coeff[v][s]] for s in range(k)]
    best = 0
    for choice in itertools.product(*options):
        rate = [0] * l
        for s, v in enumerate(choice):
            if v is not None:
                rate[v] += coeff[v][s]
        delivered = sum(1 for v in range(l) if sizes[v] > 0 and rate[v] >= sizes[v])
        best = max(best, delivered)
    return best + free


def brute_force_mis(graph: Graph) -> int:
    if graph.n > MAX_MIS_VERTICES:
        raise InstanceTooLargeError("too many vertices for subset enumeration")
    adj = [0] * graph.n
    for u, v in graph.edges:
        adj[u] |= 1 << v
        adj[v] |= 1 << u
    best = 0
    for mask in range(1 << graph.n):
        if all(not (mask >> v & 1) or not (adj[v] & mask) for v in range(graph.n)):
            best = max(best, bin(mask).count("1"))
    return best


# ---------------------------------------------------------------- deliveries


def reference_deliveries(schedule, coverage, power, packet_sizes, gains, dist,
                         bandwidth: float = 1e5, slot_duration: float = 0.025) -> np.ndarray:
    """Delivery matrix checked link by link against the rate, scheduling and half-duplex rules."""
    y = np.asarray(schedule, dtype=bool)
    m, k = y.shape
    x = np.zeros((m, m), dtype=np.int8)
    for i in range(m):
        for j in range(m):
            if i == j or dist[i][j] > coverage[i]:
                continue
            # slots where i transmits and j is free to listen
            usable = [s for s in range(k) if y[i][s] and not y[j][s]]
            if not usable:
                continue
            total = 0.0
            for s in usable:
                interference = 0.0
                for ip in range(m):
                    if ip == i or not y[ip][s]:
                        continue
                    if dist[ip][j] <= coverage[ip] and gains[ip][j][s] < gains[i][j][s]:
                        interference += power[ip] * gains[ip][j][s]
                gamma = power[i] * gains[i][j][s] / (1.0 + interference)
                total += bandwidth * slot_duration * math.log2(1.0 + gamma)
            if total >= packet_sizes[i]:
                x[i][j] = 1
    return x


def feasible_schedules(m: int, k: int, max_group: int, single_slot: bool = True) -> set:
    """All schedules (as tuples of per-vehicle slot sets) with at most ``max_group`` per slot."""
    if single_slot:
        per_vehicle = [frozenset()] + [frozenset([s]) for s in range(k)]
    else:
        per_vehicle = [frozenset(c) for r in range(k + 1) for c in itertools.combinations(range(k), r)]
    out = set()
    for combo in itertools.product(per_vehicle, repeat=m):
        counts = [sum(s in c for c in combo) for s in range(k)]
        if max(counts, default=0) <= max_group:
            out.add(combo)
    return out


def _schedule_matrix(combo, k: int) -> np.ndarray:
    y = np.zeros((len(combo), k), dtype=bool)
    for i, c in enumerate(combo):
        for s in c:
            y[i, s] = True
    return y


# ---------------------------------------------------------------- VAMP


@dataclass
class VampSnapshot:
    """Frozen gains and distances for each delivery period of a short episode.

    ``gains[t]`` is (m, m, k) and ``dist[t]`` is (m, m) for periods
    t = 1..n-1; the AoI at period n only depends on deliveries before it.
    """

    gains: list
    dist: list
    packet_sizes: np.ndarray
    periods: int
    max_group: int = 2
    bandwidth: float = 1e5
    slot_duration: float = 0.025

    @property
    def vehicles(self) -> int:
        return int(np.asarray(self.dist[0]).shape[0])

    @property
    def slots(self) -> int:
        return int(np.asarray(self.gains[0]).shape[2])


@dataclass
class VampOptimum:
    total_aoi: int
    deliveries: list = field(default_factory=list)
    allocations: list = field(default_factory=list)


def total_aoi_of(deliveries: Sequence[np.ndarray], m: int, periods: int) -> int:
    """Objective value: sum over periods 1..n and ordered pairs of the AoI."""
    delta = [[0 if i == j else 1 for j in range(m)] for i in range(m)]
    total = sum(map(sum, delta))
    for t in range(1, periods):
        x = deliveries[t - 1]
        delta = [[0 if i == j else min(1 + (1 - int(x[i][j])) * delta[i][j], periods + 1)
                  for j in range(m)] for i in range(m)]
        total += sum(map(sum, delta))
    return total


def achievable_deliveries(gains, dist, packet_sizes, coverage_grid, power_grid, max_group: int,
                          bandwidth: float = 1e5, slot_duration: float = 0.025,
                          single_slot: bool = False) -> dict:
    """Map each reachable delivery matrix (as bytes) to one allocation producing it."""
    m = np.asarray(dist).shape[0]
    k = np.asarray(gains).shape[2]
    found: dict = {}
    for combo in sorted(feasible_schedules(m, k, max_group, single_slot), key=repr):
        y = _schedule_matrix(combo, k)
        for cov in itertools.product(coverage_grid, repeat=m):
            for pw in itertools.product(power_grid, repeat=m):
                x = reference_deliveries(y, cov, pw, packet_sizes, gains, dist, bandwidth, slot_duration)
                key = x.tobytes()
                if key not in found:
                    found[key] = (x, (y, np.array(cov, dtype=float), np.array(pw, dtype=float)))
    return found


def brute_force_vamp(snapshot: VampSnapshot, coverage_grid: Sequence[float],
                     power_grid: Sequence[float], single_slot: bool = False) -> VampOptimum:
    """Exact minimum total AoI over the grid of schedules, coverages and powers."""
    m, k, n = snapshot.vehicles, snapshot.slots, snapshot.periods
    if m > MAX_VAMP_VEHICLES or k > MAX_VAMP_SLOTS or n > MAX_VAMP_PERIODS:
        raise InstanceTooLargeError("snapshot exceeds m <= 4, k <= 3, n <= 3")
    if len(coverage_grid) > MAX_GRID_LEVELS or len(power_grid) > MAX_GRID_LEVELS:
        raise InstanceTooLargeError("grids may hold at most 4 levels")
    if len(snapshot.gains) < n - 1 or len(snapshot.dist) < n - 1:
        raise ValueError("snapshot needs gains and distances for n - 1 periods")
    options = []
    for t in range(n - 1):
        found = achievable_deliveries(snapshot.gains[t], snapshot.dist[t], snapshot.packet_sizes,
                                      coverage_grid, power_grid, snapshot.max_group,
                                      snapshot.bandwidth, snapshot.slot_duration, single_slot)
        options.append(list(found.values()))
    best: Optional[VampOptimum] = None
    for seq in itertools.product(*options):
        xs = [x for x, _ in seq]
        value = total_aoi_of(xs, m, n)
        if best is None or value < best.total_aoi:
            best = VampOptimum(value, xs, [a for _, a in seq])
    if best is None:  # n == 1: nothing to decide
        best = VampOptimum(total_aoi_of([], m, n))
    return best


# ---------------------------------------------------------------- GM stability


def matching_cost(slot_of: Sequence[Optional[int]], dist: np.ndarray, radius: float, eps: float) -> float:
    """Sum over matched vehicles of their average cross-influence within their slot."""
    total = 0.0
    for i, s in enumerate(slot_of):
        if s is None:
            continue
        peers = [p for p, sp in enumerate(slot_of) if sp == s and p != i]
        if not peers:
            total += eps
            continue
        acc = 0.0
        for p in peers:
            d = dist[i][p]
            acc += (2 * radius - d) ** 2 if 2 * radius > d else eps
        total += acc / (1 + len(peers))
    return total


def _rotation_valid(slot_of, moved, dist, radius) -> bool:
    for v in moved:
        for p, sp in enumerate(slot_of):
            if p != v and sp == slot_of[v] and dist[v][p] <= radius:
                return False
    return True


def improving_rotations(slot_of: Sequence[Optional[int]], dist: np.ndarray, radius: float,
                        eps: float, max_len: int, tol: float = 1e-9) -> list:
    """Every valid rotation of length <= ``max_len`` that lowers the cost by more than ``tol``."""
    base = matching_cost(slot_of, dist, radius, eps)
    matched = [i for i, s in enumerate(slot_of) if s is not None]
    found = []
    for L in range(2, min(max_len, len(matched)) + 1):
        for seq in itertools.permutations(matched, L):
            slots = [slot_of[v] for v in seq]
            for ell in range(1, L):
                new = list(slot_of)
                for idx, v in enumerate(seq):
                    new[v] = slots[(idx + ell) % L]
                if not _rotation_valid(new, seq, dist, radius):
                    continue
                cost = matching_cost(new, dist, radius, eps)
                if cost < base - tol:
                    found.append((seq, ell, cost))
    return found


def is_rotation_stable(slot_of, dist, radius, eps, max_len, tol: float = 1e-9) -> bool:
    return not improving_rotations(slot_of, dist, radius, eps, max_len, tol)


def matching_violations(slot_of: Sequence[Optional[int]], dist: np.ndarray, radius: float,
                        max_group: int) -> list[str]:
    """Human-readable list of forbidden co-slot pairs and oversized slots."""
    out = []
    groups: dict = {}
    for i, s in enumerate(slot_of):
        if s is not None:
            groups.setdefault(s, []).append(i)
    for s, members in groups.items():
        if len(members) > max_group:
            out.append(f"slot {s} holds {len(members)} vehicles")
        for a, b in itertools.combinations(members, 2):
            if dist[a][b] <= radius:
                out.append(f"vehicles {a} and {b} share slot {s} at {dist[a][b]:.1f} m")
    return out
