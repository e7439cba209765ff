"""Checkpoint aggregation: flush strategies, a striped-PFS simulator and a
byte-exact file executor."""

from ._kernels import BACKEND
from .model import CheckpointSet, ClusterSpec, FlushPlan, StripeLayout, WriteExtent
from .planner import elect_leaders, exclusive_prefix_sum, stripe_conflicts
from .simulator import InterferenceModel, PfsModel, Scenario, SimReport, simulate, sweep
from .strategies import STRATEGIES, StrategyConfig, make_plan

__all__ = [
    "BACKEND", "CheckpointSet", "ClusterSpec", "FlushPlan", "StripeLayout", "WriteExtent",
    "elect_leaders", "exclusive_prefix_sum", "stripe_conflicts", "InterferenceModel",
    "PfsModel", "Scenario", "SimReport", "simulate", "sweep", "STRATEGIES",
    "StrategyConfig", "make_plan",
]
