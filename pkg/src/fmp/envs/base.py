from __future__ import annotations

from typing import Any, Protocol

import numpy as np

from ..errors import TerminalState
from ..model import PomdpModel, RewardScaling, bayes_filter, uniform_belief
from ..spaces import BeliefSpace, TabularSpace


class Environment(Protocol):
    """What the benchmark harness needs from an environment.

    ``step`` returns rewards in the environment's original units; ``scaling``
    maps the planner's non-negative rewards back to those units.
    """

    space: BeliefSpace
    num_actions: int
    scaling: RewardScaling

    def initial_belief(self) -> np.ndarray: ...

    def reset(self, rng: np.random.Generator) -> Any: ...

    def step(self, state, action: int, rng: np.random.Generator) -> tuple[Any, int, float]: ...

    def is_terminal(self, state) -> bool: ...

    def update_belief(self, belief: np.ndarray, action: int, observation: int) -> np.ndarray: ...


class TabularEnv:
    """Simulator for a :class:`PomdpModel`; rewards are the model's means."""

    def __init__(self, model: PomdpModel, initial=None):
        self.model = model
        self.space = TabularSpace(model)
        self.num_actions = model.num_actions
        self.scaling = model.scaling
        self._initial = uniform_belief(model.num_states) if initial is None else np.asarray(initial, float)
        self._t_cdf = np.cumsum(model.transition, axis=2)
        self._z_cdf = np.cumsum(model.observation, axis=1)

    def initial_belief(self):
        return self._initial.copy()

    def reset(self, rng):
        return int(np.searchsorted(np.cumsum(self._initial), rng.random(), side="right"))

    def is_terminal(self, state):
        return False

    def step(self, state, action, rng):
        m = self.model
        row = self._t_cdf[action, state]
        nxt = min(int(np.searchsorted(row, rng.random() * row[-1], side="right")), m.num_states - 1)
        zrow = self._z_cdf[nxt]
        obs = min(int(np.searchsorted(zrow, rng.random() * zrow[-1], side="right")), m.num_observations - 1)
        reward = float(self.scaling.to_original(m.expected_reward[state, action]))
        return nxt, obs, reward

    def update_belief(self, belief, action, observation):
        return bayes_filter(self.model, belief, action, observation).posterior


def env_step(env: Environment, state, action: int, rng: np.random.Generator):
    """Sample ``(next_state, observation, reward)`` from the true dynamics."""
    if env.is_terminal(state):
        raise TerminalState("episode has terminated")
    return env.step(state, action, rng)
