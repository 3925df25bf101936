"""Tabular POMDP model, Bayes filter and a brute-force expectimax oracle."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceeded, ImpossibleObservation

ROW_TOL = 1e-9
EXPECTIMAX_GUARD = 10**7


def _frozen(x) -> np.ndarray:
    arr = np.array(x, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RewardScaling:
    """Affine map from planner rewards back to original units: r = scale * r' + shift."""

    scale: float = 1.0
    shift: float = 0.0

    def to_original(self, r):
        return self.scale * np.asarray(r) + self.shift

    def to_planner(self, r):
        return (np.asarray(r) - self.shift) / self.scale


@dataclass(frozen=True, eq=False)
class PomdpModel:
    """Finite POMDP with next-state conditioned observations.

    ``transition[a, s, s2]`` is T(s2 | s, a), ``observation[s2, o]`` is Z(o | s2),
    ``expected_reward[s, a]`` is the mean reward in [0, reward_max].
    """

    transition: np.ndarray
    observation: np.ndarray
    expected_reward: np.ndarray
    reward_max: float
    discount: float
    scaling: RewardScaling = field(default_factory=RewardScaling)

    def __post_init__(self):
        object.__setattr__(self, "transition", _frozen(self.transition))
        object.__setattr__(self, "observation", _frozen(self.observation))
        object.__setattr__(self, "expected_reward", _frozen(self.expected_reward))
        object.__setattr__(self, "reward_max", float(self.reward_max))
        object.__setattr__(self, "discount", float(self.discount))
        A, S, S2 = self.transition.shape
        if S != S2:
            raise ValueError(f"transition must be (A, S, S), got {self.transition.shape}")
        if self.observation.ndim != 2 or self.observation.shape[0] != S:
            raise ValueError(f"observation must be (S, O), got {self.observation.shape}")
        if self.expected_reward.shape != (S, A):
            raise ValueError(f"expected_reward must be (S, A), got {self.expected_reward.shape}")

    @property
    def num_states(self) -> int:
        return self.transition.shape[1]

    @property
    def num_actions(self) -> int:
        return self.transition.shape[0]

    @property
    def num_observations(self) -> int:
        return self.observation.shape[1]

    def __eq__(self, other):
        if not isinstance(other, PomdpModel):
            return NotImplemented
        return (
            self.reward_max == other.reward_max
            and self.discount == other.discount
            and np.array_equal(self.transition, other.transition)
            and np.array_equal(self.observation, other.observation)
            and np.array_equal(self.expected_reward, other.expected_reward)
        )

    __hash__ = None


@dataclass(frozen=True)
class Violation:
    kind: str
    location: tuple
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def _check_rows(rows: np.ndarray, kind: str, loc) -> list[Violation]:
    out = []
    for idx in np.ndindex(rows.shape[:-1]):
        row = rows[idx]
        if np.any(row < 0):
            out.append(Violation(kind, loc(idx), f"negative entry in {kind} row {idx}"))
        total = row.sum()
        if abs(total - 1.0) > ROW_TOL:
            out.append(Violation(kind, loc(idx), f"{kind} row {idx} sums to {total!r}"))
    return out


def validate_model(model: PomdpModel) -> ValidationReport:
    """Check every model invariant; returns a report instead of raising."""
    v = []
    # transition is stored (a, s, s'), report as (s, a)
    v += _check_rows(model.transition, "transition", lambda i: (i[1], i[0]))
    v += _check_rows(model.observation, "observation", lambda i: (i[0],))
    r = model.expected_reward
    for s, a in zip(*np.nonzero((r < 0) | (r > model.reward_max))):
        v.append(Violation("reward", (int(s), int(a)),
                           f"expected_reward[{s},{a}]={r[s, a]!r} outside [0, {model.reward_max}]"))
    if not 0.0 <= model.discount < 1.0:
        v.append(Violation("discount", (), f"discount {model.discount} not in [0, 1)"))
    return ValidationReport(tuple(v))


def as_belief(b, num_states: int | None = None) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.ndim != 1 or (num_states is not None and b.shape[0] != num_states):
        raise ValueError(f"belief has shape {b.shape}, expected ({num_states},)")
    if np.any(b < 0) or abs(b.sum() - 1.0) > ROW_TOL:
        raise ValueError("belief must be non-negative and sum to 1")
    return b


def uniform_belief(num_states: int) -> np.ndarray:
    return np.full(num_states, 1.0 / num_states)


@dataclass(frozen=True)
class FilterResult:
    posterior: np.ndarray
    obs_probability: float
    expected_reward: float


def transition_marginal(model: PomdpModel, b, a: int) -> np.ndarray:
    """Pr(s') = sum_s T(s'|s,a) b(s)."""
    return np.asarray(b, dtype=float) @ model.transition[a]


def observation_distribution(model: PomdpModel, b, a: int) -> np.ndarray:
    return transition_marginal(model, b, a) @ model.observation


def expected_reward(model: PomdpModel, b, a: int) -> float:
    return float(np.asarray(b, dtype=float) @ model.expected_reward[:, a])


def bayes_filter(model: PomdpModel, b, a: int, o: int) -> FilterResult:
    b = np.asarray(b, dtype=float)
    joint = model.observation[:, o] * transition_marginal(model, b, a)
    eta = joint.sum()
    if eta <= 0.0:
        raise ImpossibleObservation(f"observation {o} has probability 0 after action {a}")
    return FilterResult(joint / eta, float(eta), expected_reward(model, b, a))


def exact_expectimax_value(model: PomdpModel, b, horizon: int,
                           leaf_value: float = 0.0) -> tuple[float, int | None]:
    """Exact finite-horizon belief value by full enumeration.

    Zero-probability observations are skipped. Returns ``(value, action)``;
    action is ``None`` at horizon 0. Ties go to the lowest action index.
    """
    A, O = model.num_actions, model.num_observations
    if float(A) ** horizon * float(O) ** horizon > EXPECTIMAX_GUARD:
        raise BudgetExceeded(f"|A|^h |O|^h = {A}^{horizon} * {O}^{horizon} exceeds {EXPECTIMAX_GUARD}")
    gamma = model.discount

    def value(belief, h):
        if h == 0:
            return leaf_value, None
        best, best_a = -np.inf, None
        for a in range(A):
            marg = belief @ model.transition[a]
            q = float(belief @ model.expected_reward[:, a])
            for o in range(O):
                joint = model.observation[:, o] * marg
                eta = joint.sum()
                if eta <= 0.0:
                    continue
                q += gamma * eta * value(joint / eta, h - 1)[0]
            if q > best:
                best, best_a = q, a
        return best, best_a

    v, a = value(np.asarray(b, dtype=float), horizon)
    return float(v), a
