"""Implicit Euler solvers: nonlinear state, linearized sensitivity, backward adjoint.

Trajectories are arrays of shape ``(n_steps + 1, n_interior)``.
"""

from dataclasses import dataclass

import numpy as np

from .discretization import solve_tridiag
from .model import phi_eval, phi_prime


class SolverError(RuntimeError):
    """Newton iteration failed at some time step."""

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} (time step {step})")
        self.step = step


@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-10
    max_iter: int = 50
    max_halvings: int = 10

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


def _tridiag_solve(off, diag, rhs):
    return solve_tridiag(off, diag, off, rhs)


def solve_forward(theta, problem, config=NewtonConfig(), u_init=None):
    """Parameter-to-state map: implicit Euler with a Newton solve per step."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (problem.n,) or not np.all(np.isfinite(theta)):
        raise ValueError("theta must be a finite field on the space grid")
    tg = problem.time
    dt = tg.dt
    phi = problem.phi
    lap = problem.ops.laplacian
    h2 = problem.space.h ** 2
    off = np.full(problem.n - 1, -1.0 / h2)
    base_diag = 1.0 / dt + 2.0 / h2

    u = np.empty((tg.n_steps + 1, problem.n))
    u[0] = problem.u0 if u_init is None else u_init
    linear = phi.is_linear or (phi.gamma == 1)
    for k in range(1, tg.n_steps + 1):
        rhs = u[k - 1] / dt + theta
        scale = 1.0 + np.max(np.abs(rhs))
        if linear:
            coeff = phi_prime(u[k - 1], phi)
            u[k] = _tridiag_solve(off, base_diag + coeff, rhs)
            continue
        v = u[k - 1].copy()
        res = v / dt - lap(v) + phi_eval(v, phi) - rhs
        rnorm = np.max(np.abs(res))
        for it in range(config.max_iter):
            if rnorm <= config.tol * scale:
                break
            step = _tridiag_solve(off, base_diag + phi_prime(v, phi), res)
            lam = 1.0
            for _ in range(config.max_halvings + 1):
                trial = v - lam * step
                tres = trial / dt - lap(trial) + phi_eval(trial, phi) - rhs
                tnorm = np.max(np.abs(tres))
                if np.isfinite(tnorm) and tnorm < rnorm:
                    break
                lam *= 0.5
            else:
                raise SolverError("Newton line search failed", step=k)
            v, res, rnorm = trial, tres, tnorm
        else:
            if rnorm > config.tol * scale:
                raise SolverError(f"Newton did not converge (residual {rnorm:.3e})", step=k)
        u[k] = v
    return u


def solve_sensitivity(theta, ubar, xi, problem, ic_xi=None):
    """Directional derivative ``S'(theta) xi`` with ``Phi'`` frozen along ``ubar``."""
    tg = problem.time
    dt = tg.dt
    xi = np.asarray(xi, dtype=float)
    h2 = problem.space.h ** 2
    off = np.full(problem.n - 1, -1.0 / h2)
    base_diag = 1.0 / dt + 2.0 / h2
    if ubar.shape != (tg.n_steps + 1, problem.n) or xi.shape != (problem.n,):
        raise ValueError("dimension mismatch in sensitivity solve")
    dphi = phi_prime(ubar, problem.phi)
    v = np.empty_like(ubar)
    v[0] = 0.0 if ic_xi is None else ic_xi
    for k in range(1, tg.n_steps + 1):
        v[k] = _tridiag_solve(off, base_diag + dphi[k], v[k - 1] / dt + xi)
    return v


def solve_adjoint_backward(theta, ubar, source, problem, jumps=None):
    """Backward implicit Euler for ``-p' = f_u'^* p + s``, ``p(T) = 0``.

    ``source`` holds dual fields on every time node (zero off the active
    range).  ``jumps`` maps node index ``k`` to a dual field ``J`` applied as
    ``p(t_k^-) = p(t_k^+) + J``; the stored ``p[k]`` is the left limit.
    """
    tg = problem.time
    dt = tg.dt
    N = tg.n_steps
    h2 = problem.space.h ** 2
    off = np.full(problem.n - 1, -1.0 / h2)
    base_diag = 1.0 / dt + 2.0 / h2
    if source is None:
        source = np.zeros_like(ubar)
    source = np.asarray(source, dtype=float)
    if source.shape != ubar.shape:
        raise ValueError("adjoint source must be given on every time node")
    jumps = jumps or {}
    dphi = phi_prime(ubar, problem.phi)
    p = np.zeros_like(ubar)
    if N in jumps:
        p[N] = jumps[N]
    for k in range(N - 1, -1, -1):
        p[k] = _tridiag_solve(off, base_diag + dphi[k], p[k + 1] / dt + source[k])
        if k in jumps:
            p[k] = p[k] + jumps[k]
    return p
