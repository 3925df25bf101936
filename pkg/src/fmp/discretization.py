"""Coordinate grids over [0, 1]^n, depth-dependent resolution schedules and the
error / memory bound calculators that go with them.

The grid at resolution ``eps`` has per-coordinate levels ``0, eps, 2 eps, ...``
below 1, plus 1 itself. When ``1/eps`` is an integer that is exactly
``1 + 1/eps`` levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTarget

# Index-space slack so that mathematically exact half-steps (0.5/0.2) still round up.
_TIE_TOL = 1e-9


def levels_per_coordinate(eps: float) -> int:
    """Number of grid levels on [0, 1] at resolution ``eps``."""
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"resolution must lie in (0, 1], got {eps}")
    return math.ceil(1.0 / eps - _TIE_TOL) + 1


def grid_indices(x, eps: float) -> np.ndarray:
    """Nearest-level index for every entry of ``x`` (half-steps round up)."""
    x = np.asarray(x, dtype=float)
    top = levels_per_coordinate(eps) - 1  # index of the level "1"
    idx = np.floor(x / eps + 0.5 + _TIE_TOL).astype(np.int64)
    idx = np.clip(idx, 0, top - 1)
    # between the last regular level and 1 the midpoint decides
    below_one = (top - 1) * eps
    idx = np.where(x >= 0.5 * (below_one + 1.0) - _TIE_TOL * eps, top, idx)
    return idx


def grid_values(idx, eps: float) -> np.ndarray:
    idx = np.asarray(idx)
    top = levels_per_coordinate(eps) - 1
    return np.where(idx >= top, 1.0, idx * eps)


@dataclass(frozen=True)
class GridKey:
    indices: tuple[int, ...]
    resolution: float

    def vector(self) -> np.ndarray:
        return grid_values(np.array(self.indices), self.resolution)


def grid_project(b, eps: float, renormalize: bool = False) -> tuple[GridKey, np.ndarray]:
    """Nearest point of the grid to ``b`` (coordinate-wise rounding).

    The grid point generally is not a distribution; ``renormalize`` rescales it
    to sum to one. An all-zero grid point cannot be rescaled, so the input
    itself (normalized) is returned instead.
    """
    idx = grid_indices(b, eps)
    vec = grid_values(idx, eps)
    if renormalize:
        total = vec.sum()
        if total > 0:
            vec = vec / total
        else:
            b = np.asarray(b, dtype=float)
            vec = b / b.sum()
    return GridKey(tuple(int(i) for i in idx), float(eps)), vec


@dataclass(frozen=True)
class EpsilonSchedule:
    """Grid resolution for every depth 0..horizon."""

    epsilons: tuple[float, ...]

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        if not eps:
            raise ValueError("schedule needs at least the root resolution")
        if any(not 0.0 < e <= 1.0 for e in eps):
            raise ValueError(f"resolutions must lie in (0, 1]: {eps}")
        object.__setattr__(self, "epsilons", eps)

    @property
    def horizon(self) -> int:
        return len(self.epsilons) - 1

    def __getitem__(self, d: int) -> float:
        return self.epsilons[d]

    def __len__(self) -> int:
        return len(self.epsilons)

    @classmethod
    def constant(cls, eps: float, horizon: int) -> "EpsilonSchedule":
        return cls((eps,) * (horizon + 1))


def epsilon_schedule(eps_b0: float, gamma: float, h0: int) -> EpsilonSchedule:
    """eps_d = min(1, eps_b0 / gamma**d) for d = 0..h0."""
    if eps_b0 <= 0 or not 0 < gamma < 1:
        raise ValueError("need eps_b0 > 0 and 0 < gamma < 1")
    return EpsilonSchedule(tuple(min(1.0, eps_b0 / gamma**d) for d in range(h0 + 1)))


@dataclass(frozen=True)
class PlanParams:
    target_error: float
    horizon_real: float
    horizon: int
    epsilon_b0: float


def plan_params(target_error: float, gamma: float, reward_max: float) -> PlanParams:
    """Tree height and root resolution that guarantee ``target_error`` at the root."""
    if target_error <= 0 or not 0 < gamma < 1 or reward_max <= 0:
        raise ValueError("need target_error > 0, 0 < gamma < 1, reward_max > 0")
    ratio = (1 - gamma) * target_error / (2 * reward_max)
    if ratio >= 1:
        raise DegenerateTarget(
            f"target error {target_error} >= 2 R_max / (1 - gamma) = {2 * reward_max / (1 - gamma)}")
    h_real = math.log(ratio) / math.log(gamma)
    eps_b0 = ratio / (gamma * h_real)
    return PlanParams(target_error, h_real, max(1, math.ceil(h_real - 1e-9)), eps_b0)


def lipschitz_bound(i: int, gamma: float, reward_max: float, leaf_lipschitz: float) -> float:
    """Lipschitz constant (in L1) of the height-i value function."""
    g = gamma**i
    return reward_max * (1 - g) / (1 - gamma) + g * leaf_lipschitz


def error_bound(h: int, deltas, lipschitz, gamma: float, leaf_error: float) -> float:
    """Worst-case value error at height ``h`` given per-height cover radii."""
    deltas = np.asarray(deltas, dtype=float)
    lipschitz = np.asarray(lipschitz, dtype=float)
    if deltas.shape != (h,) or lipschitz.shape != (h,):
        raise ValueError(f"need {h} radii and {h} Lipschitz constants")
    i = np.arange(h)
    return float(np.sum(gamma ** (h - i) * lipschitz * deltas) + gamma**h * leaf_error)


def memory_bound_log10(eps_b0: float, gamma: float, num_states: int) -> float:
    """log10 of ceil(2 / (eps_b0 (1 - gamma)))^|S|; the bound itself overflows."""
    base = math.ceil(2.0 / (eps_b0 * (1 - gamma)) - 1e-9)
    return num_states * math.log10(base)


def grid_cell_count_log10(eps: float, dim: int) -> float:
    return dim * math.log10(levels_per_coordinate(eps))
