"""Seeded sparse random POMDPs."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..model import PomdpModel


@dataclass(frozen=True)
class RandomPomdpSpec:
    num_states: int
    sparsity: float
    num_actions: int = 4
    num_observations: int | None = None  # defaults to num_states
    reward_max: float = 1.0
    discount: float = 0.95
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.sparsity < 1.0:
            raise ValueError(f"sparsity must lie in (0, 1), got {self.sparsity}")
        if self.num_states < 1 or self.num_actions < 1:
            raise ValueError("need at least one state and one action")


def support_size(width: int, sparsity: float) -> int:
    """max(1, round((1 - sp) * width)), halves rounding up."""
    return max(1, math.floor((1.0 - sparsity) * width + 0.5))


def _sparse_rows(rng, rows: int, width: int, sparsity: float) -> np.ndarray:
    m = support_size(width, sparsity)
    out = np.zeros((rows, width))
    for r in range(rows):
        support = rng.choice(width, size=m, replace=False)
        w = 1.0 - rng.random(m)  # uniform on (0, 1]
        out[r, support] = w / w.sum()
    return out


def generate_random_pomdp(spec: RandomPomdpSpec) -> PomdpModel:
    """Random model whose rows each have ``round((1 - sp) * width)`` nonzeros.

    Draw order (fixed, so a seed pins the model): transition rows for every
    (a, s), then observation rows for every s', then the reward table, where
    each r(s, a) is 0 with probability sp and uniform on (0, R_max] otherwise.
    """
    rng = np.random.default_rng(spec.seed)
    S, A = spec.num_states, spec.num_actions
    O = spec.num_observations or S
    T = _sparse_rows(rng, A * S, S, spec.sparsity).reshape(A, S, S)
    Z = _sparse_rows(rng, S, O, spec.sparsity)
    zero = rng.random((S, A)) < spec.sparsity
    R = np.where(zero, 0.0, spec.reward_max * (1.0 - rng.random((S, A))))
    return PomdpModel(T, Z, R, spec.reward_max, spec.discount)
