"""Benchmark environments and the episode-simulation interface."""

from .base import Environment, TabularEnv, env_step
from .random_pomdp import RandomPomdpSpec, generate_random_pomdp
from .rocksample import (
    FactoredRockBelief,
    RockSampleEnv,
    RockSampleSpace,
    RockSampleSpec,
    RockState,
    factored_filter,
    load_rock_layout,
    rocksample_env,
)

__all__ = [
    "Environment",
    "FactoredRockBelief",
    "RandomPomdpSpec",
    "RockSampleEnv",
    "RockSampleSpace",
    "RockSampleSpec",
    "RockState",
    "TabularEnv",
    "env_step",
    "factored_filter",
    "generate_random_pomdp",
    "load_rock_layout",
    "rocksample_env",
]
