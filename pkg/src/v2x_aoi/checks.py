"""Self-check suites behind the ``gradcheck`` and ``oracle-check`` subcommands."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import oracle
from .aoi import initial_aoi, update_aoi
from .ddpg import AgentConfig, DDPGAgent
from .matching import GmConfig, gm_match_detailed
from .neural import MLP, MlpSpec, gradients
from .noma_phy import PeriodAllocation, evaluate_deliveries


@dataclass
class CheckRecord:
    check: str
    instances: int
    failures: int
    worst: float = 0.0

    @property
    def passed(self) -> bool:
        return self.failures == 0


def _rel_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    if denom < 1e-12:
        return 0.0
    return float(np.linalg.norm(a - b) / denom)


def numeric_gradient(f, params: list[np.ndarray], h: float = 1e-6) -> list[np.ndarray]:
    """Central differences of scalar ``f()`` w.r.t. each array in ``params`` (perturbed in place)."""
    out = []
    for p in params:
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for idx in range(flat.size):
            old = flat[idx]
            flat[idx] = old + h
            up = f()
            flat[idx] = old - h
            down = f()
            flat[idx] = old
            gflat[idx] = (up - down) / (2 * h)
        out.append(g)
    return out


def mlp_gradient_error(rng: np.random.Generator) -> float:
    """Worst relative error over parameters and input for one random small MLP."""
    depth = int(rng.integers(1, 4))
    sizes = [int(v) for v in rng.integers(2, 7, size=depth + 1)]
    spec = MlpSpec(tuple(sizes), "relu", str(rng.choice(["tanh", "none"])))
    net = MLP.init(spec, rng)
    x = rng.normal(size=(int(rng.integers(1, 5)), sizes[0]))
    upstream = rng.normal(size=(x.shape[0], sizes[-1]))

    def loss():
        return float(np.sum(upstream * net.forward(x)))

    grads, input_grad = gradients(net, x, upstream)
    numeric = numeric_gradient(loss, net.parameters())
    worst = max(_rel_error(a, n) for a, n in zip(grads, numeric))
    num_input = numeric_gradient(loss, [x])[0]
    return max(worst, _rel_error(input_grad, num_input))


def composed_gradient_error(rng: np.random.Generator) -> float:
    """Actor gradient pushed through the critic against finite differences."""
    state_size, action_size = int(rng.integers(2, 6)), int(rng.integers(1, 4))
    hidden = tuple(int(v) for v in rng.integers(3, 8, size=2))
    agent = DDPGAgent(state_size, action_size, AgentConfig(hidden=hidden, actor_final_scale=1.0),
                      seed=int(rng.integers(2**31)))
    states = rng.normal(size=(int(rng.integers(2, 6)), state_size))

    def objective():
        actions = agent.actor.forward(states)
        return -float(np.mean(agent.critic.forward(np.hstack([states, actions]))))

    _, grads = agent.actor_gradients(states)
    numeric = numeric_gradient(objective, agent.actor.parameters())
    return max(_rel_error(a, n) for a, n in zip(grads, numeric))


def gradcheck_suite(seed: int = 0, networks: int = 50) -> list[CheckRecord]:
    rng = np.random.default_rng(seed)
    mlp = [mlp_gradient_error(rng) for _ in range(networks)]
    comp = [composed_gradient_error(rng) for _ in range(networks)]
    return [
        CheckRecord("mlp_gradients", networks, sum(e >= 1e-4 for e in mlp), max(mlp)),
        CheckRecord("actor_through_critic", networks, sum(e >= 1e-3 for e in comp), max(comp)),
    ]


def random_distances(rng: np.random.Generator, m: int, span: float = 600.0) -> np.ndarray:
    pts = rng.uniform(0, span, size=(m, 2))
    return np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)


def gm_stability_failures(rng: np.random.Generator, instances: int = 1000) -> int:
    """Feasibility and rotation stability of GM on random instances with m <= 5, k <= 3."""
    failures = 0
    for _ in range(instances):
        m, k = int(rng.integers(2, 6)), int(rng.integers(1, 4))
        radius = float(rng.uniform(50, 250))
        cfg = GmConfig(radius=radius, max_group=int(rng.integers(1, 4)), max_rotation_len=m)
        dist = random_distances(rng, m)
        res = gm_match_detailed(dist, k, cfg, rng)
        slot_of = res.matching.slot_of
        bad = bool(oracle.matching_violations(slot_of, dist, radius, cfg.max_group))
        bad |= res.cost > res.phase1_cost + 1e-9
        bad |= not oracle.is_rotation_stable(slot_of, dist, radius, cfg.epsilon, cfg.max_rotation_len)
        bad |= abs(oracle.matching_cost(slot_of, dist, radius, cfg.epsilon) - res.cost) > 1e-6 * max(1.0, abs(res.cost))
        failures += int(bad)
    return failures


def random_tiny_allocation(rng: np.random.Generator, m: int, k: int):
    """Schedule with possibly several slots per vehicle, plus bounded gains and distances."""
    y = rng.random((m, k)) < 0.45
    coverage = rng.uniform(0, 300, size=m)
    power = rng.uniform(0, 1, size=m)
    packets = rng.uniform(0, 24000, size=m)
    gains = rng.exponential(1.0, size=(m, m, k)) * 10 ** rng.uniform(1, 4, size=(m, m, 1))
    for s in range(k):
        np.fill_diagonal(gains[:, :, s], 0.0)
    dist = random_distances(rng, m, span=200.0)
    return PeriodAllocation(y, coverage, power, packets), gains, dist


def delivery_mismatches(rng: np.random.Generator, instances: int = 500) -> int:
    bad = 0
    for _ in range(instances):
        m, k = int(rng.integers(2, 5)), int(rng.integers(1, 4))
        alloc, gains, dist = random_tiny_allocation(rng, m, k)
        fast = evaluate_deliveries(alloc, gains, dist)
        ref = oracle.reference_deliveries(alloc.schedule, alloc.coverage, alloc.power,
                                          alloc.packet_sizes, gains, dist)
        bad += int(not np.array_equal(fast, ref))
    return bad


def reduction_mismatches(max_vertices: int = 5) -> tuple[int, int]:
    count = bad = 0
    for n in range(2, max_vertices + 1):
        for g in oracle.all_graphs(n):
            if not g.edges:
                continue
            count += 1
            bad += int(oracle.brute_force_vamp_prime(oracle.reduce_mis(g)) != oracle.brute_force_mis(g))
    return count, bad


def aoi_violations(rng: np.random.Generator, sequences: int = 100_000, m: int = 3, n: int = 6) -> int:
    """Randomized AoI sequences compared against the scalar recursion and its bounds."""
    x = rng.random((sequences, n, m, m)) < 0.5
    delta = np.broadcast_to(initial_aoi(m), (sequences, m, m)).copy()
    bad = np.zeros(sequences, dtype=bool)
    for t in range(n):
        new = update_aoi(delta, x[:, t].astype(np.int8), n)
        expected = np.where(x[:, t], 1, np.minimum(delta + 1, n + 1))
        eye = np.eye(m, dtype=bool)
        expected[:, eye] = 0
        bad |= (new != expected).any(axis=(1, 2))
        bad |= (new[:, eye] != 0).any(axis=1)
        bad |= (new[:, ~eye] < 1).any(axis=1) | (new > n + 1).any(axis=(1, 2))
        delta = new
    return int(bad.sum())


def oracle_suite(seed: int = 0, gm_instances: int = 1000, phy_instances: int = 500) -> list[CheckRecord]:
    rng = np.random.default_rng(seed)
    graphs, reduction_bad = reduction_mismatches()
    return [
        CheckRecord("aoi_state_machine", 100_000, aoi_violations(rng)),
        CheckRecord("gm_feasible_stable", gm_instances, gm_stability_failures(rng, gm_instances)),
        CheckRecord("mis_reduction", graphs, reduction_bad),
        CheckRecord("delivery_enumerator", phy_instances, delivery_mismatches(rng, phy_instances)),
    ]
