"""Belief spaces the planner can search over.

A belief space exposes the per-belief operations (``filter``,
``observation_support``, ``project``) together with batched counterparts used
by the tree builder, which works on whole levels at once:

``expand(beliefs, a, sampling, rng)``
    children of every belief under action ``a``: an :class:`Expansion` with
    ``prob`` (N, K), ``reward`` (N,) and ``posterior`` (N, K, D). Branches with
    zero probability carry arbitrary posteriors and are ignored.
``project_batch(beliefs, eps)``
    integer grid keys (M, P) and the representative beliefs (M, D).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .discretization import grid_indices, grid_values
from .model import FilterResult, PomdpModel, bayes_filter, observation_distribution


@dataclass(frozen=True)
class SamplingConfig:
    """``mode`` is ``"exact"`` (enumerate every observation) or ``"sample"``."""

    mode: str = "exact"
    samples_per_node: int = 8
    rng_seed: int = 0

    def __post_init__(self):
        if self.mode not in ("exact", "sample"):
            raise ValueError(f"unknown sampling mode {self.mode!r}")
        if self.mode == "sample" and self.samples_per_node < 1:
            raise ValueError("samples_per_node must be >= 1")


@dataclass
class Expansion:
    prob: np.ndarray
    reward: np.ndarray
    posterior: np.ndarray


class BeliefSpace(Protocol):
    num_actions: int
    dim: int
    known_multiplicity: int
    discount: float
    reward_max: float

    def filter(self, b, a: int, o: int) -> FilterResult: ...

    def observation_support(self, b, a: int) -> list[tuple[int, float]]: ...

    def project(self, b, eps: float) -> tuple[tuple[int, ...], np.ndarray]: ...

    def expand(self, beliefs: np.ndarray, a: int, sampling: SamplingConfig,
               rng: np.random.Generator) -> Expansion: ...

    def project_batch(self, beliefs: np.ndarray, eps: float) -> tuple[np.ndarray, np.ndarray]: ...


def sample_categorical(probs: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """``k`` inverse-CDF draws from every row of ``probs``; shape (N, k)."""
    cdf = np.cumsum(probs, axis=1)
    cdf /= cdf[:, -1:]
    u = rng.random((probs.shape[0], k))
    idx = (u[:, :, None] >= cdf[:, None, :]).sum(axis=2)
    return np.minimum(idx, probs.shape[1] - 1)


def project_simplex_rows(beliefs: np.ndarray, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Grid keys and renormalized grid points for rows of a flat belief matrix.

    A row whose grid point is all zeros keeps its own (exact) belief.
    """
    keys = grid_indices(beliefs, eps)
    vec = grid_values(keys, eps)
    total = vec.sum(axis=1, keepdims=True)
    safe = np.where(total > 0, total, 1.0)
    proj = np.where(total > 0, vec / safe, beliefs)
    return keys, proj


class TabularSpace:
    """Flat probability-vector beliefs over a :class:`PomdpModel`."""

    known_multiplicity = 1

    def __init__(self, model: PomdpModel):
        self.model = model
        self.num_actions = model.num_actions
        self.dim = model.num_states
        self.discount = model.discount
        self.reward_max = model.reward_max

    def filter(self, b, a, o):
        return bayes_filter(self.model, b, a, o)

    def observation_support(self, b, a):
        eta = observation_distribution(self.model, b, a)
        return [(int(o), float(eta[o])) for o in np.flatnonzero(eta > 0)]

    def project(self, b, eps):
        keys, proj = project_simplex_rows(np.asarray(b, dtype=float)[None, :], eps)
        return tuple(int(i) for i in keys[0]), proj[0]

    def project_batch(self, beliefs, eps):
        return project_simplex_rows(beliefs, eps)

    def expand(self, beliefs, a, sampling, rng):
        m = self.model
        reward = beliefs @ m.expected_reward[:, a]
        marg = beliefs @ m.transition[a]
        if sampling.mode == "exact":
            Z = m.observation
            joint = marg[:, None, :] * Z.T[None, :, :]  # (N, O, S)
            eta = joint.sum(axis=2)
            safe = np.where(eta > 0, eta, 1.0)
            return Expansion(eta, reward, joint / safe[:, :, None])
        k = sampling.samples_per_node
        eta = marg @ m.observation
        obs = sample_categorical(eta, k, rng)
        joint = marg[:, None, :] * m.observation.T[obs]  # (N, k, S)
        norm = joint.sum(axis=2, keepdims=True)
        prob = np.full(obs.shape, 1.0 / k)
        return Expansion(prob, reward, joint / norm)
