"""POMCP baseline for tabular models: particle beliefs plus UCT search.

The search kernel is compiled with numba and draws from its own splitmix64
stream, seeded from ``UctConfig.seed`` (or the caller's generator), so
count-budgeted runs are reproducible.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numba
import numpy as np

from .errors import EmptyBelief, ImpossibleObservation, ParticleDepletion
from .model import PomdpModel, bayes_filter


@dataclass(frozen=True)
class UctConfig:
    """``budget`` counts simulations; ``time_budget`` (seconds), if set, caps
    wall-clock instead and makes the result timing dependent."""

    c: float = 10.0
    budget: int = 10_000
    max_depth: int = 90
    seed: int = 0
    time_budget: float | None = None

    def __post_init__(self):
        if self.c < 0:
            raise ValueError("exploration constant must be >= 0")
        if self.budget < 1:
            raise ValueError("simulation budget must be >= 1")


@dataclass
class ParticleBelief:
    particles: np.ndarray
    capacity: int

    @classmethod
    def from_distribution(cls, b, capacity: int, rng: np.random.Generator) -> "ParticleBelief":
        b = np.asarray(b, dtype=float)
        return cls(rng.choice(b.size, size=capacity, p=b / b.sum()).astype(np.int64), capacity)

    def empirical(self, num_states: int) -> np.ndarray:
        counts = np.bincount(self.particles, minlength=num_states).astype(float)
        return counts / counts.sum()

    def __len__(self) -> int:
        return len(self.particles)


@dataclass
class PomcpResult:
    action: int
    value: float  # estimated value of the chosen action
    q_values: np.ndarray
    visits: np.ndarray
    simulations: int


def alias_table(p) -> tuple[np.ndarray, np.ndarray]:
    """Walker/Vose alias table for one distribution; O(1) sampling."""
    p = np.asarray(p, dtype=float)
    n = p.size
    scaled = p * (n / p.sum())
    prob = np.zeros(n)
    alias = np.arange(n)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        s, g = small.pop(), large.pop()
        prob[s] = scaled[s]
        alias[s] = g
        scaled[g] -= 1.0 - scaled[s]
        (small if scaled[g] < 1.0 else large).append(g)
    for i in large + small:  # leftovers are 1 up to rounding
        prob[i] = 1.0 if p[i] > 0 else 0.0
        alias[i] = i if p[i] > 0 else alias[i]
    return prob, alias


def _alias_rows(P: np.ndarray):
    flat = P.reshape(-1, P.shape[-1])
    tables = [alias_table(row) for row in flat]
    prob = np.array([t[0] for t in tables]).reshape(P.shape)
    alias = np.array([t[1] for t in tables], dtype=np.int64).reshape(P.shape)
    return np.ascontiguousarray(prob), np.ascontiguousarray(alias)


class TabularSimulator:
    """Generative model G(s, a) -> (s', o, r) backed by a :class:`PomdpModel`."""

    def __init__(self, model: PomdpModel):
        self.model = model
        self.t_cdf = np.ascontiguousarray(np.cumsum(model.transition, axis=2))
        self.z_cdf = np.ascontiguousarray(np.cumsum(model.observation, axis=1))
        self.t_cdf[:, :, -1] = 1.0
        self.z_cdf[:, -1] = 1.0
        self.t_prob, self.t_alias = _alias_rows(model.transition)
        self.z_prob, self.z_alias = _alias_rows(model.observation)
        self.reward = np.ascontiguousarray(model.expected_reward)

    def step_many(self, states: np.ndarray, a: int, rng: np.random.Generator):
        cdf = self.t_cdf[a, states]
        nxt = (rng.random(len(states))[:, None] >= cdf).sum(axis=1)
        nxt = np.minimum(nxt, self.model.num_states - 1)
        zc = self.z_cdf[nxt]
        obs = (rng.random(len(states))[:, None] >= zc).sum(axis=1)
        obs = np.minimum(obs, self.model.num_observations - 1)
        return nxt, obs


def _as_simulator(sim) -> TabularSimulator:
    if isinstance(sim, TabularSimulator):
        return sim
    if isinstance(sim, PomdpModel):
        return TabularSimulator(sim)
    model = getattr(sim, "model", None)
    if isinstance(model, PomdpModel):
        return TabularSimulator(model)
    raise TypeError(f"cannot build a tabular simulator from {type(sim).__name__}")


_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


@numba.njit(cache=True)
def _uniform(rs):
    """splitmix64 stream kept in ``rs[0]``; returns a double in [0, 1)."""
    rs[0] += _GOLDEN
    z = rs[0]
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@numba.njit(cache=True)
def _randint(rs, n):
    return int(_uniform(rs) * n)


@numba.njit(cache=True)
def _draw_t(rs, t_prob, t_alias, a, s):
    x = _uniform(rs) * t_prob.shape[2]
    i = int(x)
    if x - i < t_prob[a, s, i]:
        return i
    return t_alias[a, s, i]


@numba.njit(cache=True)
def _draw_z(rs, z_prob, z_alias, s):
    x = _uniform(rs) * z_prob.shape[1]
    i = int(x)
    if x - i < z_prob[s, i]:
        return i
    return z_alias[s, i]


@numba.njit(cache=True)
def _select(node, node_n, an_n, an_q, A, c):
    for a in range(A):
        if an_n[node, a] == 0:
            return a
    best = -1
    best_v = -np.inf
    log_n = np.log(node_n[node])
    for a in range(A):
        v = an_q[node, a] + c * np.sqrt(log_n / an_n[node, a])
        if v > best_v:
            best_v = v
            best = a
    return best


@numba.njit(cache=True)
def _simulate(rs, t_prob, t_alias, z_prob, z_alias, reward, gamma, c, max_depth, particles,
              node_n, an_n, an_q, child, n_nodes, path_node, path_action, path_reward):
    A = reward.shape[1]
    s = particles[_randint(rs, particles.shape[0])]
    node = 0
    depth = 0
    tail = 0.0
    while depth < max_depth:
        a = _select(node, node_n, an_n, an_q, A, c)
        s2 = _draw_t(rs, t_prob, t_alias, a, s)
        o = _draw_z(rs, z_prob, z_alias, s2)
        path_node[depth] = node
        path_action[depth] = a
        path_reward[depth] = reward[s, a]
        depth += 1
        s = s2
        nxt = child[node, a, o]
        if nxt < 0:
            if n_nodes < node_n.shape[0]:
                child[node, a, o] = n_nodes
                n_nodes += 1
            # random rollout from the new node
            disc = 1.0
            for _ in range(depth, max_depth):
                ra = _randint(rs, A)
                tail += disc * reward[s, ra]
                disc *= gamma
                s = _draw_t(rs, t_prob, t_alias, ra, s)
            break
        node = nxt
    g = tail
    for i in range(depth - 1, -1, -1):
        g = path_reward[i] + gamma * g
        nd = path_node[i]
        a = path_action[i]
        node_n[nd] += 1
        an_n[nd, a] += 1
        an_q[nd, a] += (g - an_q[nd, a]) / an_n[nd, a]
    return n_nodes


@numba.njit(cache=True)
def _search(t_prob, t_alias, z_prob, z_alias, reward, gamma, c, max_depth, particles, budget, seed,
            node_n, an_n, an_q, child):
    rs = np.zeros(1, dtype=np.uint64)
    rs[0] = np.uint64(seed)
    path_node = np.zeros(max_depth, dtype=np.int64)
    path_action = np.zeros(max_depth, dtype=np.int64)
    path_reward = np.zeros(max_depth)
    n_nodes = 1
    for _ in range(budget):
        n_nodes = _simulate(rs, t_prob, t_alias, z_prob, z_alias, reward, gamma, c, max_depth, particles,
                            node_n, an_n, an_q, child, n_nodes, path_node, path_action, path_reward)
    return n_nodes


def pomcp_plan(simulator, belief: ParticleBelief, cfg: UctConfig,
               rng: np.random.Generator | None = None) -> PomcpResult:
    """Run UCT from the particle belief; returns the most visited root action."""
    if len(belief) == 0:
        raise EmptyBelief("particle set is empty")
    sim = _as_simulator(simulator)
    m = sim.model
    seed = cfg.seed if rng is None else int(rng.integers(2**31 - 1))
    A, O = m.num_actions, m.num_observations
    particles = np.ascontiguousarray(belief.particles, dtype=np.int64)

    if cfg.time_budget is None:
        max_nodes = cfg.budget + 1
        stats = _alloc(max_nodes, A, O)
        _search(sim.t_prob, sim.t_alias, sim.z_prob, sim.z_alias, sim.reward, m.discount, cfg.c, cfg.max_depth,
                particles, cfg.budget, seed, *stats)
        sims = cfg.budget
    else:
        # wall-clock mode: run in batches until the deadline (or the count budget)
        max_nodes = cfg.budget + 1
        stats = _alloc(max_nodes, A, O)
        deadline = time.perf_counter() + cfg.time_budget
        sims, batch = 0, 256
        while sims < cfg.budget and time.perf_counter() < deadline:
            n = min(batch, cfg.budget - sims)
            _search(sim.t_prob, sim.t_alias, sim.z_prob, sim.z_alias, sim.reward, m.discount, cfg.c, cfg.max_depth,
                    particles, n, seed + sims, *stats)
            sims += n
    node_n, an_n, an_q, _ = stats
    visits = an_n[0].copy()
    action = int(np.argmax(visits))
    return PomcpResult(action, float(an_q[0, action]), an_q[0].copy(), visits, sims)


def _alloc(max_nodes: int, A: int, O: int):
    return (np.zeros(max_nodes, dtype=np.int64), np.zeros((max_nodes, A), dtype=np.int64),
            np.zeros((max_nodes, A)), np.full((max_nodes, A, O), -1, dtype=np.int32))


def particle_update(belief: ParticleBelief, a: int, o: int, simulator, rng: np.random.Generator,
                    tabular_fallback: bool = True) -> ParticleBelief:
    """Rejection update: propagate every particle, keep those that reproduce ``o``.

    Survivors are resampled with replacement up to capacity. If none survive,
    the exact Bayes filter applied to the empirical particle distribution is
    sampled instead (tabular models only).
    """
    if len(belief) == 0:
        raise EmptyBelief("particle set is empty")
    sim = _as_simulator(simulator)
    nxt, obs = sim.step_many(belief.particles, a, rng)
    kept = nxt[obs == o]
    if kept.size:
        return ParticleBelief(rng.choice(kept, size=belief.capacity, replace=True), belief.capacity)
    if not tabular_fallback:
        raise ParticleDepletion(f"no particle reproduced observation {o} after action {a}")
    prior = belief.empirical(sim.model.num_states)
    try:
        post = bayes_filter(sim.model, prior, a, o).posterior
    except ImpossibleObservation as exc:
        raise ParticleDepletion(str(exc)) from exc
    return ParticleBelief.from_distribution(post, belief.capacity, rng)
