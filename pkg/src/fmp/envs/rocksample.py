"""RockSample[n, k] with a product-of-Bernoulli belief over rock quality.

Agent position is known, so a belief is stored as one row
``[x, y, terminal, p_1, ..., p_k]`` where ``p_i`` is the probability that
rock ``i`` is good. Actions are ``N, S, E, W, sample, check_1 .. check_k``;
observations are ``NONE, GOOD, BAD``. Original rewards: +10 for leaving the
map eastwards (terminal), +10 / -10 for sampling a good / bad rock, -10 for
sampling where there is no rock, 0 otherwise. Bumping into the north, south or
west wall leaves the agent in place. The planner sees ``(r + 10) / 20``, and a
terminated episode keeps paying the image of 0 so that the shift is the same
on every path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from ..discretization import grid_indices, grid_values
from ..errors import ImpossibleObservation, InvalidAction, TerminalState
from ..model import FilterResult, RewardScaling
from ..spaces import Expansion, SamplingConfig

NORTH, SOUTH, EAST, WEST, SAMPLE = range(5)
FIRST_CHECK = 5
OBS_NONE, OBS_GOOD, OBS_BAD = range(3)
ACTION_NAMES = ("north", "south", "east", "west", "sample")

REWARD_GOOD = 10.0
REWARD_BAD = -10.0
REWARD_EXIT = 10.0
SCALING = RewardScaling(scale=20.0, shift=-10.0)

_X, _Y, _TERM = 0, 1, 2
_P = 3


def load_rock_layout(source) -> tuple[tuple[int, int], ...]:
    """Rock layout file: one ``x y`` pair per line, ``#`` comments allowed."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source) as fh:
            text = fh.read()
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'x y', got {raw!r}")
        out.append((int(parts[0]), int(parts[1])))
    return tuple(out)


def standard_layout(n: int, k: int) -> tuple[tuple[int, int], ...] | None:
    """Bundled layout for RS[7,8] / RS[11,11] / RS[15,15], if present."""
    name = f"rocksample_{n}_{k}.txt"
    res = resources.files("fmp.data").joinpath(name)
    if not res.is_file():
        return None
    with res.open() as fh:
        return load_rock_layout(fh)


@dataclass(frozen=True)
class RockSampleSpec:
    """``rock_positions`` None draws a seeded layout; ``layout="standard"`` uses
    the bundled literature map when one exists for (n, k)."""

    n: int
    k: int
    rock_positions: tuple[tuple[int, int], ...] | None = None
    half_efficiency_distance: float = 20.0
    seed: int = 0
    start: tuple[int, int] | None = None
    discount: float = 0.95
    layout: str = "random"

    def resolved_positions(self) -> tuple[tuple[int, int], ...]:
        if self.rock_positions is not None:
            pos = tuple((int(x), int(y)) for x, y in self.rock_positions)
        elif self.layout == "standard" and standard_layout(self.n, self.k) is not None:
            pos = standard_layout(self.n, self.k)
        else:
            rng = np.random.default_rng(self.seed)
            cells = rng.choice(self.n * self.n, size=self.k, replace=False)
            pos = tuple((int(c % self.n), int(c // self.n)) for c in cells)
        if len(pos) != self.k or len(set(pos)) != self.k:
            raise ValueError(f"need {self.k} distinct rock positions, got {pos}")
        if any(not (0 <= x < self.n and 0 <= y < self.n) for x, y in pos):
            raise ValueError(f"rock outside the {self.n}x{self.n} map: {pos}")
        return pos

    def resolved_start(self) -> tuple[int, int]:
        return self.start if self.start is not None else (0, self.n // 2)


@dataclass(frozen=True)
class RockState:
    x: int
    y: int
    rocks: tuple[bool, ...]
    terminal: bool = False


@dataclass(frozen=True)
class FactoredRockBelief:
    x: int
    y: int
    probs: tuple[float, ...]
    terminal: bool = False

    def to_row(self) -> np.ndarray:
        return np.array([self.x, self.y, float(self.terminal), *self.probs])

    @classmethod
    def from_row(cls, row) -> "FactoredRockBelief":
        row = np.asarray(row, dtype=float)
        return cls(int(row[_X]), int(row[_Y]), tuple(float(p) for p in row[_P:]), bool(row[_TERM]))


class RockSampleSpace:
    """Planner view of RockSample: rows ``[x, y, terminal, p_1..p_k]``.

    Only the rock probabilities are projected; position and the terminal flag
    are exact parts of the grid key. Terminal rows have their probabilities
    zeroed so every terminal belief maps to one node.
    """

    reward_max = 1.0

    def __init__(self, spec: RockSampleSpec):
        self.spec = spec
        self.n, self.k = spec.n, spec.k
        self.rocks = np.array(spec.resolved_positions(), dtype=float)
        self.num_actions = FIRST_CHECK + self.k
        self.dim = self.k
        self.known_multiplicity = self.n * self.n + 1
        self.discount = spec.discount
        self.rock_at = np.full((self.n, self.n), -1, dtype=np.int64)
        for i, (x, y) in enumerate(spec.resolved_positions()):
            self.rock_at[x, y] = i

    def accuracy(self, x, y, i: int):
        """Probability that check_i reports the true rock quality."""
        dist = np.hypot(np.asarray(x, float) - self.rocks[i, 0], np.asarray(y, float) - self.rocks[i, 1])
        return 0.5 * (1.0 + 2.0 ** (-dist / self.spec.half_efficiency_distance))

    def initial_belief(self) -> np.ndarray:
        x, y = self.spec.resolved_start()
        return FactoredRockBelief(x, y, (0.5,) * self.k).to_row()

    # batched ------------------------------------------------------------

    def expand(self, beliefs: np.ndarray, a: int, sampling: SamplingConfig | None = None,
               rng=None) -> Expansion:
        b = np.asarray(beliefs, dtype=float)
        N = b.shape[0]
        term = b[:, _TERM] > 0.5
        x = b[:, _X].astype(np.int64)
        y = b[:, _Y].astype(np.int64)
        reward = np.zeros(N)
        if a < FIRST_CHECK:
            post = b.copy()
            if a == NORTH:
                post[:, _Y] = np.minimum(y + 1, self.n - 1)
            elif a == SOUTH:
                post[:, _Y] = np.maximum(y - 1, 0)
            elif a == WEST:
                post[:, _X] = np.maximum(x - 1, 0)
            elif a == EAST:
                exits = x == self.n - 1
                post[:, _X] = np.minimum(x + 1, self.n - 1)
                reward = np.where(exits, REWARD_EXIT, 0.0)
                post[exits, _TERM] = 1.0
                post[exits, _P:] = 0.0
            elif a == SAMPLE:
                rock = self.rock_at[x, y]
                has = rock >= 0
                rows = np.flatnonzero(has)
                p = b[rows, _P + rock[rows]]
                reward = np.full(N, REWARD_BAD)
                reward[rows] = p * REWARD_GOOD + (1.0 - p) * REWARD_BAD
                post[rows, _P + rock[rows]] = 0.0
            reward = np.where(term, 0.0, reward)
            post[term] = b[term]
            return Expansion(np.ones((N, 1)), SCALING.to_planner(reward), post[:, None, :])

        i = a - FIRST_CHECK
        if not 0 <= i < self.k:
            raise InvalidAction(f"action {a} out of range")
        acc = self.accuracy(x, y, i)
        p = b[:, _P + i]
        eta_good = p * acc + (1.0 - p) * (1.0 - acc)
        eta_bad = 1.0 - eta_good
        good, bad = b.copy(), b.copy()
        with np.errstate(invalid="ignore", divide="ignore"):
            good[:, _P + i] = np.where(eta_good > 0, p * acc / eta_good, p)
            bad[:, _P + i] = np.where(eta_bad > 0, p * (1.0 - acc) / eta_bad, p)
        prob = np.stack([eta_good, eta_bad], axis=1)
        prob[term] = (1.0, 0.0)
        good[term] = b[term]
        return Expansion(prob, SCALING.to_planner(np.zeros(N)), np.stack([good, bad], axis=1))

    def project_batch(self, beliefs: np.ndarray, eps: float):
        b = np.asarray(beliefs, dtype=float)
        idx = grid_indices(b[:, _P:], eps)
        keys = np.concatenate([b[:, :_P].astype(np.int64), idx], axis=1)
        proj = b.copy()
        proj[:, _P:] = grid_values(idx, eps)
        return keys, proj

    # single belief ------------------------------------------------------

    def observation_support(self, b, a: int) -> list[tuple[int, float]]:
        if a < FIRST_CHECK:
            return [(OBS_NONE, 1.0)]
        ex = self.expand(np.asarray(b, float)[None, :], a)
        return [(o, float(p)) for o, p in zip((OBS_GOOD, OBS_BAD), ex.prob[0]) if p > 0]

    def filter(self, b, a: int, o: int) -> FilterResult:
        b = np.asarray(b, dtype=float)
        ex = self.expand(b[None, :], a)
        if a < FIRST_CHECK:
            branch = 0
        elif o in (OBS_GOOD, OBS_BAD):
            branch = 0 if o == OBS_GOOD else 1
        else:
            raise InvalidAction(f"check actions observe GOOD or BAD, got {o}")
        eta = float(ex.prob[0, branch])
        if eta <= 0:
            raise ImpossibleObservation(f"observation {o} impossible after action {a}")
        return FilterResult(ex.posterior[0, branch].copy(), eta, float(ex.reward[0]))

    def project(self, b, eps: float):
        keys, proj = self.project_batch(np.asarray(b, float)[None, :], eps)
        return tuple(int(v) for v in keys[0]), proj[0]

    def exit_leaf_value(self, beliefs: np.ndarray) -> np.ndarray:
        """Planner-unit value of walking straight east to the exit."""
        g = self.discount
        b = np.atleast_2d(beliefs)
        base = 0.5 / (1.0 - g)  # image of reward 0 forever
        steps = (self.n - 1) - b[:, _X]
        bonus = (SCALING.to_planner(REWARD_EXIT) - 0.5) * g**steps
        return np.where(b[:, _TERM] > 0.5, base, base + bonus)


def factored_filter(space: RockSampleSpace, belief, a: int, o: int) -> FilterResult:
    """Product-form Bayes update; reward is in planner units."""
    return space.filter(belief, a, o)


class RockSampleEnv:
    """True RockSample dynamics plus the factored belief space."""

    scaling = SCALING

    def __init__(self, spec: RockSampleSpec):
        self.spec = spec
        self.space = RockSampleSpace(spec)
        self.num_actions = self.space.num_actions

    def initial_belief(self) -> np.ndarray:
        return self.space.initial_belief()

    def reset(self, rng: np.random.Generator) -> RockState:
        x, y = self.spec.resolved_start()
        rocks = tuple(bool(v) for v in rng.random(self.spec.k) < 0.5)
        return RockState(x, y, rocks)

    def is_terminal(self, state: RockState) -> bool:
        return state.terminal

    def step(self, state: RockState, a: int, rng: np.random.Generator):
        if state.terminal:
            raise TerminalState("episode has terminated")
        n = self.spec.n
        x, y, rocks = state.x, state.y, state.rocks
        if a == NORTH:
            return RockState(x, min(y + 1, n - 1), rocks), OBS_NONE, 0.0
        if a == SOUTH:
            return RockState(x, max(y - 1, 0), rocks), OBS_NONE, 0.0
        if a == WEST:
            return RockState(max(x - 1, 0), y, rocks), OBS_NONE, 0.0
        if a == EAST:
            if x == n - 1:
                return RockState(x, y, rocks, terminal=True), OBS_NONE, REWARD_EXIT
            return RockState(x + 1, y, rocks), OBS_NONE, 0.0
        if a == SAMPLE:
            i = int(self.space.rock_at[x, y])
            if i < 0:
                return state, OBS_NONE, REWARD_BAD
            reward = REWARD_GOOD if rocks[i] else REWARD_BAD
            new = list(rocks)
            new[i] = False
            return RockState(x, y, tuple(new)), OBS_NONE, reward
        i = a - FIRST_CHECK
        if not 0 <= i < self.spec.k:
            raise InvalidAction(f"action {a} out of range")
        correct = rng.random() < float(self.space.accuracy(x, y, i))
        good = rocks[i] if correct else not rocks[i]
        return state, (OBS_GOOD if good else OBS_BAD), 0.0

    def update_belief(self, belief, a: int, o: int) -> np.ndarray:
        return self.space.filter(belief, a, o).posterior


def rocksample_env(spec: RockSampleSpec) -> RockSampleEnv:
    return RockSampleEnv(spec)


def action_name(a: int) -> str:
    return ACTION_NAMES[a] if a < FIRST_CHECK else f"check_{a - FIRST_CHECK + 1}"


def num_actions(k: int) -> int:
    return FIRST_CHECK + k


def max_discounted_return(gamma: float, steps: int) -> float:
    """Loose upper bound on an episode return in original units."""
    return REWARD_GOOD * (1 - gamma**steps) / (1 - gamma) if gamma < 1 else math.inf
