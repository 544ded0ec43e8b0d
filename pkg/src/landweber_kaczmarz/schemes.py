"""Splitting of the time line into Kaczmarz equations.

Observation data live on *slots*: every time node for continuous observation,
one slot per measurement instant for discrete observation.  Each equation
carries quadrature weights over the slots (trapezoid on its node range, the
problem's point weights on its measurement points) and the half-open node range
``(w_lo, w_hi]`` on which the model residual of the all-at-once operator is
active.
"""

from dataclasses import dataclass

import numpy as np

from .discretization import trapezoid_weights

SCHEMES = ("standard", "init_in_all", "growing", "full")


@dataclass(frozen=True, eq=False)
class Equation:
    index: int
    w_lo: int
    w_hi: int
    has_h: bool
    z_weights: np.ndarray
    slot_nodes: np.ndarray

    @property
    def active_slots(self):
        return np.flatnonzero(self.z_weights)

    @property
    def model_nodes(self):
        return np.arange(self.w_lo + 1, self.w_hi + 1)


def slot_nodes(problem):
    if problem.obs.is_discrete:
        return np.asarray(problem.obs.times)
    return np.arange(problem.time.n_steps + 1)


def n_equations(problem, scheme):
    if scheme not in SCHEMES:
        raise ValueError(f"unknown Kaczmarz scheme {scheme!r}")
    return 1 if scheme == "full" else problem.time.n_sub


def equation(problem, scheme, j):
    """Equation ``j`` of the cycle for ``scheme``."""
    n = n_equations(problem, scheme)
    if not 0 <= j < n:
        raise IndexError(f"equation index {j} outside 0..{n - 1}")
    bounds = problem.time.bounds
    N = problem.time.n_steps
    if scheme == "full":
        lo, hi, has_h = 0, N, True
    elif scheme == "growing":
        lo, hi, has_h = 0, bounds[j + 1], True
    else:
        lo, hi = bounds[j], bounds[j + 1]
        has_h = j == 0 or scheme == "init_in_all"
    nodes = slot_nodes(problem)
    if problem.obs.is_discrete:
        point = problem.point_weights
        weights = np.zeros(len(nodes))
        if scheme == "full":
            weights[:] = point
        elif scheme == "growing":
            weights[:j + 1] = point[:j + 1]
        else:
            weights[j] = point[j]
    else:
        weights = trapezoid_weights(lo, hi, problem.time.dt, N + 1)
    weights.setflags(write=False)
    return Equation(j, lo, hi, has_h, weights, nodes)


def equations(problem, scheme):
    return [equation(problem, scheme, j) for j in range(n_equations(problem, scheme))]
