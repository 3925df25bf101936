"""Finite memory online POMDP planning with depth-dependent belief grids."""

from .discretization import (
    EpsilonSchedule,
    epsilon_schedule,
    error_bound,
    grid_project,
    lipschitz_bound,
    memory_bound_log10,
    plan_params,
)
from .model import PomdpModel, bayes_filter, exact_expectimax_value, validate_model
from .planner import PlanConfig, backward_induction, build_tree, depth_stats, plan
from .pomdp_io import dump_pomdp_text, load_pomdp_file, load_pomdp_text
from .spaces import SamplingConfig, TabularSpace

__all__ = [
    "EpsilonSchedule", "PlanConfig", "PomdpModel", "SamplingConfig", "TabularSpace",
    "backward_induction", "bayes_filter", "build_tree", "depth_stats", "dump_pomdp_text",
    "epsilon_schedule", "error_bound", "exact_expectimax_value", "grid_project",
    "lipschitz_bound", "load_pomdp_file", "load_pomdp_text", "memory_bound_log10", "plan",
    "plan_params", "validate_model",
]
__version__ = "0.1.0"
