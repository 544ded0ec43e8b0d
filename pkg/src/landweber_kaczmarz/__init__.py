"""Loping Landweber-Kaczmarz identification of a source term in a semilinear diffusion model."""

from .discretization import GelfandOps, SpaceGrid, TimeGrid
from .model import Nonlinearity, ObservationOperator, Problem
from .solvers import NewtonConfig, SolverError, solve_forward
from .aao import AllAtOnceOperator
from .reduced import ReducedOperator

__all__ = [
    "AllAtOnceOperator",
    "GelfandOps",
    "NewtonConfig",
    "Nonlinearity",
    "ObservationOperator",
    "Problem",
    "ReducedOperator",
    "SolverError",
    "SpaceGrid",
    "TimeGrid",
    "solve_forward",
]
