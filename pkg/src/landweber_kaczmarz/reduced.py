"""Reduced forward operator ``theta -> C S(theta)`` restricted to Kaczmarz equations."""

from dataclasses import dataclass, field
import itertools

import numpy as np

from .discretization import solve_tridiag, trapezoid_time
from .model import obs_adjoint, phi_prime
from .schemes import equation, n_equations
from .solvers import NewtonConfig, solve_adjoint_backward, solve_forward, solve_sensitivity

ADJOINT_MODES = ("formula", "transpose")

_tokens = itertools.count(1)


@dataclass
class ReducedEvalCache:
    """Converged state ``S(theta)`` for one parameter value."""

    theta: np.ndarray = None
    trajectory: np.ndarray = None
    token: int = 0
    n_solves: int = 0
    valid: bool = field(default=False)

    def matches(self, theta):
        return self.valid and self.theta is not None and np.array_equal(self.theta, theta)


class ReducedOperator:
    """Reduced Kaczmarz family for a :class:`~.model.Problem`.

    The state is always solved on the whole horizon; only the observation is
    restricted to the equation's slots.  ``"formula"`` adjoints run the
    backward adjoint equation with the residual as source (or as jumps at the
    measurement instants) and integrate the adjoint state by the trapezoid
    rule; ``"transpose"`` is the exact transpose of the discrete sensitivity.
    """

    def __init__(self, problem, scheme="standard", adjoint="formula", newton=NewtonConfig()):
        if adjoint not in ADJOINT_MODES:
            raise ValueError(f"unknown adjoint mode {adjoint!r}")
        self.problem = problem
        self.scheme = scheme
        self.adjoint_mode = adjoint
        self.newton = newton
        self.n_equations = n_equations(problem, scheme)
        self._eqs = [equation(problem, scheme, j) for j in range(self.n_equations)]
        self.cache = ReducedEvalCache()
        self.read_slots = np.zeros(len(self._eqs[0].slot_nodes), dtype=int)

    def equation(self, j):
        if not 0 <= j < self.n_equations:
            raise IndexError(f"equation index {j} outside 0..{self.n_equations - 1}")
        return self._eqs[j]

    def state(self, theta):
        """``S(theta)``; recomputed whenever theta differs from the cached one."""
        theta = np.asarray(theta, dtype=float)
        c = self.cache
        if not c.matches(theta):
            c.trajectory = solve_forward(theta, self.problem, self.newton)
            c.theta = theta.copy()
            c.token = next(_tokens)
            c.n_solves += 1
            c.valid = True
        return c.trajectory

    def _observe(self, u):
        p = self.problem
        if p.obs.is_discrete:
            return u[list(p.obs.times)] * p.mask
        return u * p.mask

    def forward(self, theta):
        """Observation of ``S(theta)`` on all slots."""
        return self._observe(self.state(theta))

    def residual(self, theta, y, j):
        eq = self.equation(j)
        act = eq.active_slots
        self.read_slots[act] += 1
        u = self.state(theta)
        out = np.zeros((len(eq.slot_nodes), self.problem.n))
        nodes = eq.slot_nodes[act]
        out[act] = (u[nodes] * self.problem.mask) - np.asarray(y)[act] * self.problem.mask
        return out

    def deriv(self, theta, xi, j):
        eq = self.equation(j)
        u = self.state(theta)
        v = solve_sensitivity(theta, u, xi, self.problem)
        out = np.zeros((len(eq.slot_nodes), self.problem.n))
        act = eq.active_slots
        out[act] = v[eq.slot_nodes[act]] * self.problem.mask
        return out

    def inner(self, a, b, j):
        eq = self.equation(j)
        act = eq.active_slots
        return float(np.sum(eq.z_weights[act] * self.problem.inner_z(a[act], b[act])))

    def norm(self, z, j):
        return float(np.sqrt(max(self.inner(z, z, j), 0.0)))

    def domain_inner(self, a, b):
        return float(self.problem.ops.inner_h(a, b))

    def domain_norm(self, a):
        return float(np.sqrt(max(self.domain_inner(a, a), 0.0)))

    def adjoint(self, theta, z, j):
        if self.adjoint_mode == "transpose":
            return self._adjoint_transpose(theta, z, j)
        return self._adjoint_formula(theta, z, j)

    def adjoint_state(self, theta, z, j):
        """Backward adjoint state ``p^z`` and the jumps it carries.

        Continuous data enter as the source ``chi_j C^* z``, averaged over each
        backward step by the trapezoid rule (steps leaving the window get no
        source).  Discrete data enter as jumps ``p(t_i^-) = p(t_i^+) + omega_i C^* z_i`` with the point weights;
        the stored value at a jump node is the left limit.
        """
        eq = self.equation(j)
        p = self.problem
        u = self.state(theta)
        act = eq.active_slots
        dual = obs_adjoint(p.obs, np.asarray(z)[act])
        nodes = eq.slot_nodes[act]
        if p.obs.is_discrete:
            jumps = {int(k): wt * d for k, wt, d in zip(nodes, eq.z_weights[act], dual)}
            return solve_adjoint_backward(theta, u, None, p, jumps=jumps), jumps
        src = np.zeros_like(u)
        src[nodes] = dual
        inside = np.zeros(p.time.n_steps + 1, dtype=bool)
        inside[nodes] = True
        step = inside[:-1] & inside[1:]
        source = np.zeros_like(u)
        source[:-1][step] = 0.5 * (src[:-1][step] + src[1:][step])
        return solve_adjoint_backward(theta, u, source, p), {}

    def _adjoint_formula(self, theta, z, j):
        pz, jumps = self.adjoint_state(theta, z, j)
        dt = self.problem.time.dt
        N = self.problem.time.n_steps
        xi = trapezoid_time(pz, 0, N, dt)
        # the left end of each step after a jump sees the right limit
        for k, d in jumps.items():
            if k < N:
                xi -= 0.5 * dt * d
        return xi

    def _adjoint_transpose(self, theta, z, j):
        eq = self.equation(j)
        p = self.problem
        u = self.state(theta)
        dt = p.time.dt
        N = p.time.n_steps
        h2 = p.space.h ** 2
        off = np.full(p.n - 1, -1.0 / h2)
        base = 1.0 / dt + 2.0 / h2
        dphi = phi_prime(u, p.phi)
        src = np.zeros((N + 2, p.n))
        act = eq.active_slots
        np.add.at(src, eq.slot_nodes[act],
                  (eq.z_weights[act, None] / dt) * obs_adjoint(p.obs, np.asarray(z)[act]))
        pk = np.zeros(p.n)
        total = np.zeros(p.n)
        for k in range(N, 0, -1):
            pk = solve_tridiag(off, base + dphi[k], off, pk / dt + src[k])
            total += pk
        return dt * total

    def apply_normal(self, theta, xi, j):
        return self.adjoint(theta, self.deriv(theta, xi, j), j)
