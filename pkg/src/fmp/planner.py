"""Finite Memory Planner: breadth-first belief-tree construction with one grid
per depth, children merged by grid key, followed by backward induction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Union

import numpy as np

from .discretization import (
    EpsilonSchedule,
    GridKey,
    epsilon_schedule,
    grid_cell_count_log10,
    plan_params,
)
from .errors import MemoryBudgetExceeded
from .spaces import BeliefSpace, SamplingConfig

LeafValue = Union[float, Callable[[np.ndarray], np.ndarray]]

DEFAULT_MAX_NODES = 10**6
# parents expanded per batch; bounds the (N, K, D) posterior buffer
_CHUNK = 256


@dataclass
class Level:
    beliefs: np.ndarray  # (N, D) representative belief of every node
    keys: np.ndarray  # (N, P) grid keys
    eps: float

    def __len__(self) -> int:
        return self.beliefs.shape[0]


@dataclass
class ActionEdges:
    """All edges leaving one level under one action."""

    child: np.ndarray  # (N, K) index into the next level
    prob: np.ndarray  # (N, K); zero for pruned branches
    reward: np.ndarray  # (N,)

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.prob))


@dataclass(frozen=True)
class BeliefNode:
    key: GridKey
    belief: np.ndarray
    depth: int
    value: float | None = None


@dataclass(frozen=True)
class Edge:
    parent: int
    action: int
    branch: int
    obs_probability: float
    expected_reward: float
    child: int


@dataclass
class BeliefTree:
    levels: list[Level]
    edges: list[list[ActionEdges]]  # edges[d][a], d < horizon
    schedule: EpsilonSchedule
    dim: int
    known_multiplicity: int = 1
    values: list[np.ndarray] | None = None

    @property
    def horizon(self) -> int:
        return len(self.levels) - 1

    @property
    def root(self) -> BeliefNode:
        return self.node(0, 0)

    def node(self, depth: int, i: int) -> BeliefNode:
        lvl = self.levels[depth]
        value = None if self.values is None else float(self.values[depth][i])
        key = GridKey(tuple(int(x) for x in lvl.keys[i]), lvl.eps)
        return BeliefNode(key, lvl.beliefs[i], depth, value)

    def iter_edges(self, depth: int) -> Iterator[Edge]:
        for a, e in enumerate(self.edges[depth]):
            for n, k in zip(*np.nonzero(e.prob)):
                yield Edge(int(n), a, int(k), float(e.prob[n, k]), float(e.reward[n]), int(e.child[n, k]))


def _merge(keys: np.ndarray, beliefs: np.ndarray, dedup: bool):
    """Unique keys (lexicographic order), their representatives and the inverse map."""
    if not dedup:
        return keys, beliefs, np.arange(keys.shape[0])
    uniq, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    return uniq, beliefs[first], inverse.reshape(-1)


def build_tree(space: BeliefSpace, root_belief, schedule: EpsilonSchedule,
               horizon: int | None = None, sampling: SamplingConfig | None = None, *,
               rng: np.random.Generator | None = None, max_nodes: int = DEFAULT_MAX_NODES,
               dedup: bool = True, representative: str = "grid") -> BeliefTree:
    """Expand ``root_belief`` level by level down to ``horizon``.

    Every child posterior is projected onto the grid of its depth and children
    sharing a grid key become one node. The root is kept exact. A node's belief
    is the (renormalized) grid point, or with ``representative="member"`` the
    exact posterior of the first child that landed in the cell.
    """
    if representative not in ("grid", "member"):
        raise ValueError(f"unknown representative {representative!r}")
    horizon = schedule.horizon if horizon is None else horizon
    if horizon > schedule.horizon:
        raise ValueError(f"horizon {horizon} exceeds schedule length {len(schedule)}")
    sampling = sampling or SamplingConfig()
    if rng is None:
        rng = np.random.default_rng(sampling.rng_seed)

    root = np.asarray(root_belief, dtype=float)[None, :]
    root_keys, _ = space.project_batch(root, schedule[0])
    levels = [Level(root, root_keys, schedule[0])]
    edges: list[list[ActionEdges]] = []

    for d in range(horizon):
        parents = levels[d].beliefs
        N = parents.shape[0]
        eps = schedule[d + 1]
        key_parts, belief_parts, shapes, rewards, probs = [], [], [], [], []
        for a in range(space.num_actions):
            a_probs, a_rewards = [], []
            for lo in range(0, N, _CHUNK):
                ex = space.expand(parents[lo:lo + _CHUNK], a, sampling, rng)
                n, K = ex.prob.shape
                post = ex.posterior.reshape(n * K, -1)
                keys, proj = space.project_batch(post, eps)
                key_parts.append(keys)
                belief_parts.append(proj if representative == "grid" else post)
                a_probs.append(ex.prob)
                a_rewards.append(ex.reward)
            probs.append(np.concatenate(a_probs))
            rewards.append(np.concatenate(a_rewards))
            shapes.append(probs[-1].shape)
        all_keys = np.concatenate(key_parts)
        all_beliefs = np.concatenate(belief_parts)
        live = np.concatenate([p.reshape(-1) for p in probs]) > 0
        idx = np.flatnonzero(live)
        uniq, reps, inverse = _merge(all_keys[idx], all_beliefs[idx], dedup)
        if uniq.shape[0] > max_nodes:
            raise MemoryBudgetExceeded(
                f"depth {d + 1}: {uniq.shape[0]} unique nodes exceed the cap of {max_nodes}")
        child_flat = np.zeros(all_keys.shape[0], dtype=np.int64)
        child_flat[idx] = inverse
        level_edges, start = [], 0
        for a in range(space.num_actions):
            size = shapes[a][0] * shapes[a][1]
            child = child_flat[start:start + size].reshape(shapes[a])
            level_edges.append(ActionEdges(child, probs[a], rewards[a]))
            start += size
        edges.append(level_edges)
        levels.append(Level(reps, uniq, eps))

    return BeliefTree(levels, edges, schedule, space.dim,
                      getattr(space, "known_multiplicity", 1))


def leaf_values(leaf_value: LeafValue, beliefs: np.ndarray) -> np.ndarray:
    if callable(leaf_value):
        return np.asarray(leaf_value(beliefs), dtype=float).reshape(beliefs.shape[0])
    return np.full(beliefs.shape[0], float(leaf_value))


@dataclass
class InductionResult:
    value: float
    action: int
    q_values: np.ndarray  # root action values
    values: list[np.ndarray]  # per-depth node values


def backward_induction(tree: BeliefTree, gamma: float, leaf_value: LeafValue = 0.0) -> InductionResult:
    """Bellman backups from the leaves to the root; ties go to the lowest action."""
    values = [None] * len(tree.levels)
    values[-1] = leaf_values(leaf_value, tree.levels[-1].beliefs)
    q = None
    for d in range(tree.horizon - 1, -1, -1):
        nxt = values[d + 1]
        q = np.stack([e.reward + gamma * np.sum(e.prob * nxt[e.child], axis=1)
                      for e in tree.edges[d]], axis=1)
        values[d] = q.max(axis=1)
    tree.values = values
    if q is None:
        return InductionResult(float(values[0][0]), 0, np.array([]), values)
    return InductionResult(float(values[0][0]), int(np.argmax(q[0])), q[0], values)


@dataclass(frozen=True)
class DepthStats:
    depth: int
    nodes: int
    edges: int
    eps: float
    log10_cells: float  # grid cells over the projected coordinates
    log10_bound: float  # cells times the number of exactly known components

    @property
    def bound(self) -> float:
        return 10.0**self.log10_bound


def depth_stats(tree: BeliefTree) -> list[DepthStats]:
    out = []
    extra = math.log10(tree.known_multiplicity)
    for d, lvl in enumerate(tree.levels):
        n_edges = sum(e.count for e in tree.edges[d]) if d < tree.horizon else 0
        cells = grid_cell_count_log10(lvl.eps, tree.dim)
        out.append(DepthStats(d, len(lvl), n_edges, lvl.eps, cells, cells + extra))
    return out


@dataclass(frozen=True)
class PlanConfig:
    """Either ``schedule`` or ``target_error`` (with the space's R_max) must be set."""

    schedule: EpsilonSchedule | None = None
    target_error: float | None = None
    reward_max: float | None = None
    horizon: int | None = None
    leaf_value: LeafValue = 0.0
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    gamma: float | None = None
    max_nodes: int = DEFAULT_MAX_NODES
    dedup: bool = True
    representative: str = "grid"


@dataclass
class PlanResult:
    action: int
    value: float
    stats: list[DepthStats]
    q_values: np.ndarray
    tree: BeliefTree | None = None


def resolve_schedule(space: BeliefSpace, config: PlanConfig) -> tuple[EpsilonSchedule, int, float]:
    gamma = space.discount if config.gamma is None else config.gamma
    if config.schedule is not None:
        schedule = config.schedule
    elif config.target_error is not None:
        rmax = space.reward_max if config.reward_max is None else config.reward_max
        params = plan_params(config.target_error, gamma, rmax)
        schedule = epsilon_schedule(params.epsilon_b0, gamma, params.horizon)
    else:
        raise ValueError("PlanConfig needs a schedule or a target_error")
    horizon = schedule.horizon if config.horizon is None else config.horizon
    return schedule, horizon, gamma


def plan(space: BeliefSpace, belief, config: PlanConfig, rng: np.random.Generator | None = None,
         keep_tree: bool = False) -> PlanResult:
    """Choose an action at ``belief``: build the tree, then back it up."""
    schedule, horizon, gamma = resolve_schedule(space, config)
    tree = build_tree(space, belief, schedule, horizon, config.sampling, rng=rng,
                      max_nodes=config.max_nodes, dedup=config.dedup,
                      representative=config.representative)
    res = backward_induction(tree, gamma, config.leaf_value)
    return PlanResult(res.action, res.value, depth_stats(tree), res.q_values,
                      tree if keep_tree else None)
