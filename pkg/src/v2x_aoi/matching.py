"""Greedy rotation matching (GM) of transmitting vehicles to time slots.

Phase 1 builds a feasible matching greedily, phase 2 applies cyclic rotations
of the matched vehicles' slots while they strictly lower the total average
cross-influence.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .mobility import VehicleState, distance_matrix

IMPROVEMENT_TOL = 1e-9


@dataclass(frozen=True)
class GmConfig:
    radius: float = 200.0
    epsilon: float = -0.05
    max_group: int = 2
    max_rotation_len: int = 3
    max_iterations: int = 200

    def __post_init__(self):
        if not -0.1 < self.epsilon < 0:
            raise ValueError("epsilon must lie in (-0.1, 0)")
        if self.max_group < 1:
            raise ValueError("max_group must be >= 1")
        if self.max_rotation_len < 2:
            raise ValueError("max_rotation_len must be >= 2")
        if self.radius <= 0:
            raise ValueError("radius must be positive")


class Matching:
    """Vehicle-to-slot assignment; each vehicle holds at most one slot."""

    def __init__(self, slot_of: Sequence[Optional[int]], slots: int):
        self.slot_of: tuple[Optional[int], ...] = tuple(None if s is None else int(s) for s in slot_of)
        self.slots = int(slots)
        for s in self.slot_of:
            if s is not None and not 0 <= s < self.slots:
                raise ValueError(f"slot {s} out of range")

    @classmethod
    def empty(cls, vehicles: int, slots: int) -> "Matching":
        return cls([None] * vehicles, slots)

    @property
    def vehicles(self) -> int:
        return len(self.slot_of)

    def peers_of(self, s: int) -> frozenset[int]:
        return frozenset(i for i, si in enumerate(self.slot_of) if si == s)

    def matched(self) -> list[int]:
        return [i for i, s in enumerate(self.slot_of) if s is not None]

    def matched_slots(self) -> list[int]:
        return sorted({s for s in self.slot_of if s is not None})

    def group_sizes(self) -> list[int]:
        sizes = [0] * self.slots
        for s in self.slot_of:
            if s is not None:
                sizes[s] += 1
        return sizes

    def with_slot(self, i: int, s: Optional[int]) -> "Matching":
        slot_of = list(self.slot_of)
        slot_of[i] = s
        return Matching(slot_of, self.slots)

    def schedule(self) -> np.ndarray:
        """Boolean (m, k) schedule matrix."""
        y = np.zeros((self.vehicles, self.slots), dtype=bool)
        for i, s in enumerate(self.slot_of):
            if s is not None:
                y[i, s] = True
        return y

    def __eq__(self, other):
        return isinstance(other, Matching) and self.slot_of == other.slot_of and self.slots == other.slots

    def __hash__(self):
        return hash((self.slot_of, self.slots))

    def __repr__(self):
        return f"Matching({list(self.slot_of)}, slots={self.slots})"


def cross_influence(d: float, r: float, eps: float) -> float:
    if 2 * r > d:
        return (2 * r - d) ** 2
    return eps


def cross_influence_matrix(dist: np.ndarray, cfg: GmConfig) -> np.ndarray:
    r = cfg.radius
    return np.where(2 * r > dist, (2 * r - dist) ** 2, cfg.epsilon)


def forbidden_matrix(dist: np.ndarray, cfg: GmConfig) -> np.ndarray:
    f = dist <= cfg.radius
    np.fill_diagonal(f, False)
    return f


def _dist(states_or_dist) -> np.ndarray:
    if isinstance(states_or_dist, np.ndarray):
        return states_or_dist
    return distance_matrix(states_or_dist)


def avg_cross_influence(i: int, s: int, matching: Matching, states_or_dist, cfg: GmConfig) -> float:
    """Average cross-influence vehicle ``i`` brings to slot ``s`` (``i`` itself excluded)."""
    dist = _dist(states_or_dist)
    peers = [p for p in matching.peers_of(s) if p != i]
    if not peers:
        return cfg.epsilon
    total = sum(cross_influence(dist[i, p], cfg.radius, cfg.epsilon) for p in peers)
    return total / (1 + len(peers))


def _slot_cost(slot_of: Sequence[Optional[int]], ci: list[list[float]], eps: float) -> float:
    groups: dict[int, list[int]] = {}
    for i, s in enumerate(slot_of):
        if s is not None:
            groups.setdefault(s, []).append(i)
    total = 0.0
    for members in groups.values():
        n = len(members)
        if n == 1:
            total += eps
            continue
        pair_sum = 0.0
        for a in range(n):
            row = ci[members[a]]
            for b in range(a + 1, n):
                pair_sum += row[members[b]]
        # each member averages over its peers with denominator 1 + |peers|
        total += 2.0 * pair_sum / n
    return total


def total_cross_influence(matching: Matching, ci, eps: float) -> float:
    """Sum over matched vehicles of their average cross-influence in their slot."""
    if isinstance(ci, np.ndarray):
        ci = ci.tolist()
    return _slot_cost(matching.slot_of, ci, eps)


def is_feasible(matching: Matching, forbidden: np.ndarray, max_group: int) -> bool:
    if any(n > max_group for n in matching.group_sizes()):
        return False
    for s in matching.matched_slots():
        members = sorted(matching.peers_of(s))
        if forbidden[np.ix_(members, members)].any():
            return False
    return True


def phase1_greedy(states_or_dist, slots: int, cfg: GmConfig, rng: np.random.Generator) -> Matching:
    dist = _dist(states_or_dist)
    m = dist.shape[0]
    if slots < 1:
        raise ValueError("need at least one slot")
    forbidden = forbidden_matrix(dist, cfg)
    matching = Matching.empty(m, slots)
    free = list(range(slots))
    for i in range(m):
        sizes = matching.group_sizes()
        available = [
            s for s in matching.matched_slots()
            if sizes[s] < cfg.max_group and not any(forbidden[i, p] for p in matching.peers_of(s))
        ]
        if not available and free:
            s_star = int(free[rng.integers(len(free))])
        elif available:
            q = [avg_cross_influence(i, s, matching, dist, cfg) for s in available]
            s_star = available[int(np.argmin(q))]  # argmin keeps the lowest slot on ties
        else:
            continue  # stays a pure receiver this period
        matching = matching.with_slot(i, s_star)
        if s_star in free:
            free.remove(s_star)
    return matching


def rotation_sequence(matching: Matching, sigma: Sequence[int], ell: int) -> list[tuple[int, int]]:
    """Pairs (sigma[i], slot of sigma[(i + ell) mod L]) for the ordered vehicles ``sigma``.

    ``ell`` runs over 1..L; ``ell == L`` reproduces the original pairs.
    """
    L = len(sigma)
    if L < 2:
        raise ValueError("a rotation needs at least two matched vehicles")
    if not 1 <= ell <= L:
        raise ValueError("ell must lie in 1..L")
    slots = [matching.slot_of[v] for v in sigma]
    if any(s is None for s in slots):
        raise ValueError("rotation vehicles must all be matched")
    return [(sigma[i], slots[(i + ell) % L]) for i in range(L)]


def apply_rotation(matching: Matching, sequence: Iterable[tuple[int, int]]) -> Matching:
    slot_of = list(matching.slot_of)
    for v, s in sequence:
        slot_of[v] = s
    return Matching(slot_of, matching.slots)


def is_valid_rotation(rotated: Matching, sigma: Sequence[int], forbidden) -> bool:
    """No rotated vehicle shares its new slot with a forbidden partner."""
    slot_of = rotated.slot_of
    for v in sigma:
        row = forbidden[v]
        sv = slot_of[v]
        for p, sp in enumerate(slot_of):
            if sp == sv and p != v and row[p]:
                return False
    return True


def best_rotation(matching: Matching, sigma: Sequence[int], ci, forbidden,
                  eps: float) -> tuple[Optional[Matching], float]:
    """Lowest-cost valid rotation matching over ell = 1..L-1 (None if none is valid)."""
    if isinstance(ci, np.ndarray):
        ci = ci.tolist()
    if isinstance(forbidden, np.ndarray):
        forbidden = forbidden.tolist()
    best, best_cost = None, np.inf
    for ell in range(1, len(sigma)):
        rotated = apply_rotation(matching, rotation_sequence(matching, sigma, ell))
        if not is_valid_rotation(rotated, sigma, forbidden):
            continue
        cost = _slot_cost(rotated.slot_of, ci, eps)
        if cost < best_cost:
            best, best_cost = rotated, cost
    return best, best_cost


def _candidate_sequences(matched: Sequence[int], max_len: int):
    # first element fixed: other orderings are cyclic shifts already covered by ell
    for L in range(2, min(max_len, len(matched)) + 1):
        for subset in itertools.combinations(matched, L):
            head, rest = subset[0], subset[1:]
            for perm in itertools.permutations(rest):
                yield (head,) + perm


@dataclass
class GmResult:
    matching: Matching
    phase1: Matching
    phase1_cost: float
    cost: float
    iterations: int
    converged: bool


def gm_match_detailed(states_or_dist, slots: int, cfg: GmConfig, rng: np.random.Generator) -> GmResult:
    dist = _dist(states_or_dist)
    ci = cross_influence_matrix(dist, cfg).tolist()
    forbidden = forbidden_matrix(dist, cfg).tolist()
    eps = cfg.epsilon
    matching = phase1_greedy(dist, slots, cfg, rng)
    phase1, phase1_cost = matching, total_cross_influence(matching, ci, eps)
    cost = phase1_cost
    iterations, converged = 0, False
    while iterations < cfg.max_iterations:
        iterations += 1
        matched = matching.matched()
        if len(matched) < 2:
            converged = True
            break
        L = int(rng.integers(2, min(cfg.max_rotation_len, len(matched)) + 1))
        sigma = [int(v) for v in rng.permutation(matched)[:L]]
        cand, cand_cost = best_rotation(matching, sigma, ci, forbidden, eps)
        if cand is None or cand_cost >= cost - IMPROVEMENT_TOL:
            # random draw failed; scan every sequence before declaring stability
            cand = None
            for seq in _candidate_sequences(matched, cfg.max_rotation_len):
                c, c_cost = best_rotation(matching, seq, ci, forbidden, eps)
                if c is not None and c_cost < cost - IMPROVEMENT_TOL:
                    cand, cand_cost = c, c_cost
                    break
            if cand is None:
                converged = True
                break
        matching, cost = cand, cand_cost
    return GmResult(matching, phase1, phase1_cost, cost, iterations, converged)


def gm_match(states_or_dist, slots: int, cfg: GmConfig, rng: np.random.Generator) -> Matching:
    return gm_match_detailed(states_or_dist, slots, cfg, rng).matching
