"""Deterministic-MDP speed planning for highway ramp merges."""

from .grid import Grid, GridSpec, HorizonExit, OutOfGrid, PhysicalState, StateIndex, build_grid
from .reward import RewardParams
from .scene import CorridorMargins, Scene, SpeedLimitProfile, VehicleTrack
from .solver import Infeasible, Plan, ProhibitedInitialState, extract_plan, plan_cycle, solve

__version__ = "0.1.0"

__all__ = [
    "CorridorMargins",
    "Grid",
    "GridSpec",
    "HorizonExit",
    "Infeasible",
    "OutOfGrid",
    "PhysicalState",
    "Plan",
    "ProhibitedInitialState",
    "RewardParams",
    "Scene",
    "SpeedLimitProfile",
    "StateIndex",
    "VehicleTrack",
    "build_grid",
    "extract_plan",
    "plan_cycle",
    "solve",
]
