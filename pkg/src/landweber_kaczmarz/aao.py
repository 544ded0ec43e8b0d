"""All-at-once forward operator on (state trajectory, parameter) pairs.

For equation ``j`` the operator maps ``(u, theta)`` to the triple

* ``w``: implicit-Euler model residual ``(u_m - u_{m-1})/dt - f(u_m, theta)``
  on the nodes ``(w_lo, w_hi]``; it is constant on each time step, so its
  time integrals are taken exactly step by step,
* ``h = u(0) - u0`` when the equation carries the initial condition,
* ``z = C u`` on the equation's observation slots (trapezoid weights for
  continuous data, unit weights for discrete measurements).

The state space carries the inner product
``(u, v)_U = sum_k dt (Du_k, Dv_k)_V + (u_0, v_0)_V`` with backward differences
``D``.  Two adjoints are offered: ``"formula"`` evaluates the closed-form
Hilbert-space adjoint of the continuous operator (double time integrals of
Riesz-lifted residuals), ``"transpose"`` is the exact adjoint of the discrete
derivative in the same inner products.
"""

from dataclasses import dataclass

import numpy as np

from .model import f_du_adjoint_apply, f_du_apply, f_eval, obs_adjoint, phi_prime
from .schemes import equation, n_equations

ADJOINT_MODES = ("formula", "transpose")


@dataclass
class ResidualTriple:
    """Value of an all-at-once equation, stored on the full grids.

    ``w`` has one row per time node (rows outside the active range are zero),
    ``h`` is None when the equation has no initial-condition row, ``z`` has
    one row per observation slot.
    """

    w: np.ndarray
    h: np.ndarray
    z: np.ndarray
    eq: object = None

    def scaled(self, c):
        h = None if self.h is None else c * self.h
        return ResidualTriple(c * self.w, h, c * self.z, self.eq)

    def __add__(self, other):
        h = None if self.h is None else self.h + other.h
        return ResidualTriple(self.w + other.w, h, self.z + other.z, self.eq)

    def __sub__(self, other):
        return self + other.scaled(-1.0)


def u_inner(u, v, ops, dt):
    """State-space inner product with backward differences."""
    du = np.diff(u, axis=0) / dt
    dv = np.diff(v, axis=0) / dt
    return dt * np.sum(ops.inner_v(du, dv)) + ops.inner_v(u[0], v[0])


def _cum_steps(F, lo, hi, dt):
    """``C[k] = dt * sum_{m in (lo, min(hi, k)]} F[m]`` for every node k."""
    C = np.zeros_like(F)
    if hi > lo:
        C[lo + 1:hi + 1] = dt * np.cumsum(F[lo + 1:hi + 1], axis=0)
        C[hi + 1:] = C[hi]
    return C


def _cum_trapezoid(F, lo, hi, dt):
    """``C[k]`` = trapezoid integral of ``F`` over ``[t_lo, t_min(hi, k)]``."""
    C = np.zeros_like(F)
    if hi > lo:
        seg = F[lo:hi + 1]
        C[lo + 1:hi + 1] = dt * (np.cumsum(seg, axis=0)[1:] - 0.5 * seg[0] - 0.5 * seg[1:])
        C[hi + 1:] = C[hi]
    return C


class AllAtOnceOperator:
    """All-at-once Kaczmarz family for a :class:`~.model.Problem`."""

    def __init__(self, problem, scheme="standard", adjoint="formula"):
        if adjoint not in ADJOINT_MODES:
            raise ValueError(f"unknown adjoint mode {adjoint!r}")
        self.problem = problem
        self.scheme = scheme
        self.adjoint_mode = adjoint
        self.n_equations = n_equations(problem, scheme)
        self._eqs = [equation(problem, scheme, j) for j in range(self.n_equations)]
        self.touch_counts = np.zeros(problem.time.n_steps + 1, dtype=int)

    @property
    def ops(self):
        return self.problem.ops

    @property
    def dt(self):
        return self.problem.time.dt

    def equation(self, j):
        if not 0 <= j < self.n_equations:
            raise IndexError(f"equation index {j} outside 0..{self.n_equations - 1}")
        return self._eqs[j]

    def _observe(self, u):
        p = self.problem
        if p.obs.is_discrete:
            return u[list(p.obs.times)] * p.mask
        return u * p.mask

    def _zero_triple(self, eq):
        p = self.problem
        n_slots = len(eq.slot_nodes)
        h = np.zeros(p.n) if eq.has_h else None
        return ResidualTriple(np.zeros((p.time.n_steps + 1, p.n)), h, np.zeros((n_slots, p.n)), eq)

    # forward ---------------------------------------------------------------

    def residual(self, u, theta, y, j):
        """``F_j(u, theta) - Y_j`` where the data part is ``(0, 0, y)``."""
        eq = self.equation(j)
        p = self.problem
        out = self._zero_triple(eq)
        m = eq.model_nodes
        self.touch_counts[m] += 1
        out.w[m] = (u[m] - u[m - 1]) / self.dt - f_eval(u[m], theta, p)
        if eq.has_h:
            out.h = u[0] - p.u0
        act = eq.active_slots
        out.z[act] = (self._observe(u) - y)[act] * p.mask
        return out

    def deriv(self, u, theta, v, xi, j):
        eq = self.equation(j)
        p = self.problem
        out = self._zero_triple(eq)
        m = eq.model_nodes
        out.w[m] = (v[m] - v[m - 1]) / self.dt - f_du_apply(u[m], v[m], p) - xi
        if eq.has_h:
            out.h = v[0].copy()
        act = eq.active_slots
        out.z[act] = self._observe(v)[act]
        return out

    # geometry --------------------------------------------------------------

    def range_inner(self, a, b):
        eq = a.eq
        ops = self.ops
        m = eq.model_nodes
        s = self.dt * np.sum(ops.inner_vstar(a.w[m], b.w[m])) if len(m) else 0.0
        if eq.has_h:
            s += ops.inner_v(a.h, b.h)
        act = eq.active_slots
        if len(act):
            s += np.sum(eq.z_weights[act] * self.problem.inner_z(a.z[act], b.z[act]))
        return float(s)

    def norm(self, triple):
        return float(np.sqrt(max(self.range_inner(triple, triple), 0.0)))

    def component_norms(self, triple):
        eq = triple.eq
        ops = self.ops
        m = eq.model_nodes
        nw = np.sqrt(self.dt * np.sum(ops.norm_vstar(triple.w[m]) ** 2)) if len(m) else 0.0
        nh = float(ops.norm_v(triple.h)) if eq.has_h else 0.0
        act = eq.active_slots
        nz = np.sqrt(np.sum(eq.z_weights[act] * self.problem.inner_z(triple.z[act], triple.z[act])))
        return float(nw), nh, float(nz)

    def domain_inner(self, a, b):
        (u1, th1), (u2, th2) = a, b
        return float(u_inner(u1, u2, self.ops, self.dt) + self.ops.inner_h(th1, th2))

    def domain_norm(self, a):
        return float(np.sqrt(max(self.domain_inner(a, a), 0.0)))

    # adjoint ---------------------------------------------------------------

    def adjoint(self, u, theta, triple, j):
        """``F_j'(u, theta)^* (w, h, z)`` as a (trajectory, field) pair."""
        if self.adjoint_mode == "transpose":
            return self._adjoint_transpose(u, theta, triple, j)
        return self._adjoint_formula(u, theta, triple, j)

    def _adjoint_formula(self, u, theta, triple, j):
        eq = self.equation(j)
        p = self.problem
        ops = self.ops
        dt = self.dt
        t = p.time.t[:, None]
        N = p.time.n_steps
        lo, hi = eq.w_lo, eq.w_hi
        m = eq.model_nodes

        du = np.zeros((N + 1, p.n))
        dtheta = np.zeros(p.n)
        if len(m):
            Iw = np.zeros_like(du)
            Iw[m] = ops.riesz_lift(triple.w[m])
            K = np.zeros_like(du)
            K[m] = ops.riesz_lift(f_du_adjoint_apply(u[m], Iw[m], p))
            R = np.zeros_like(du)
            R[m] = ops.riesz_lift(Iw[m])
            # step-wise exact moments of the piecewise-constant residual
            mid = t - 0.5 * dt
            K0 = _cum_steps(K, lo, hi, dt)
            K1 = _cum_steps(mid * K, lo, hi, dt)
            R0 = _cum_steps(R, lo, hi, dt)
            du += -(t + 1.0) * K0[hi] + t * K0 - K1 + R0
            dtheta -= dt * Iw[m].sum(axis=0)
        if eq.has_h:
            du += triple.h
        act = eq.active_slots
        if len(act):
            if p.obs.is_discrete:
                G = ops.riesz_lift(eq.z_weights[act, None] * obs_adjoint(p.obs, triple.z[act]))
                ti = p.time.t[eq.slot_nodes[act]]
                du += (np.minimum(t, ti[None, :]) + 1.0) @ G
            else:
                G = np.zeros_like(du)
                zlo, zhi = act[0], act[-1]
                G[act] = ops.riesz_lift(obs_adjoint(p.obs, triple.z[act]))
                G0 = _cum_trapezoid(G, zlo, zhi, dt)
                G1 = _cum_trapezoid(t * G, zlo, zhi, dt)
                du += (t + 1.0) * G0[zhi] - (t * G0 - G1)
        return du, dtheta

    def _adjoint_transpose(self, u, theta, triple, j):
        eq = self.equation(j)
        p = self.problem
        ops = self.ops
        dt = self.dt
        h = p.space.h
        N = p.time.n_steps
        m = eq.model_nodes

        # g = J^T G_out y in raw nodal coordinates
        g = np.zeros((N + 1, p.n))
        gxi = np.zeros(p.n)
        if len(m):
            # w-rows are (D v)_m + M^{-1} A v_m + Phi'(u_m) v_m - xi
            q = dt * h * ops.riesz_lift(triple.w[m])
            g[m] += q / dt + ops.stiffness_apply(q) / h + phi_prime(u[m], p.phi) * q
            g[m - 1] -= q / dt
            gxi -= q.sum(axis=0)
        if eq.has_h:
            g[0] += ops.stiffness_apply(triple.h)
        act = eq.active_slots
        if len(act):
            contrib = (eq.z_weights[act, None] * h) * triple.z[act] * p.mask
            np.add.at(g, eq.slot_nodes[act], contrib)

        # solve G_U x = g with G_U = S^T diag(A, dt A, ..., dt A) S
        c = np.zeros_like(g)
        c[1:] = dt * np.cumsum(g[:0:-1], axis=0)[::-1]
        c[0] = g[0] + c[1] / dt
        e = ops.solve_stiffness(c)
        e[1:] /= dt
        x = np.cumsum(np.concatenate([e[:1], dt * e[1:]]), axis=0)
        return x, gxi / h

    def apply_normal(self, u, theta, v, xi, j):
        """``F_j'^* F_j'`` applied to a direction."""
        return self.adjoint(u, theta, self.deriv(u, theta, v, xi, j), j)

