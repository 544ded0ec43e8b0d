"""End-to-end diagnostics suite on small grids."""

from dataclasses import dataclass

import numpy as np

from .aao import AllAtOnceOperator, u_inner
from .diagnostics import (adjoint_mismatch, fd_derivative_slope, smooth_field,
                          smooth_trajectory, tcc_estimate)
from .experiment import truth_profile
from .model import Problem
from .reduced import ReducedOperator
from .solvers import solve_forward


@dataclass
class Check:
    name: str
    value: float
    bound: str
    passed: bool

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.value:.4g} ({self.bound})"


def _operator(problem, setting, adjoint="formula", scheme="standard"):
    theta = truth_profile(problem.space.x)
    if setting == "aao":
        op = AllAtOnceOperator(problem, scheme, adjoint)
        return op, (solve_forward(theta, problem), theta)
    return ReducedOperator(problem, scheme, adjoint), theta


def adjoint_refinement(setting, levels=3, n_interior=9, n_steps=21, trials=10, seed=0):
    """Mismatch on grids with ``dt`` and ``h`` halved ``levels - 1`` times."""
    out = []
    for k in range(levels):
        p = Problem.build(n_interior=(n_interior + 1) * 2 ** k - 1, n_steps=n_steps * 2 ** k)
        op, point = _operator(p, setting)
        out.append(adjoint_mismatch(op, point, trials, seed))
    return np.array(out)


def taylor_slope(setting, n_interior=9, n_steps=21, seed=0, mutate=False):
    p = Problem.build(n_interior=n_interior, n_steps=n_steps)
    op, point = _operator(p, setting, scheme="full")
    rng = np.random.default_rng(seed)
    x, t = p.space.x, p.time.t
    if setting == "aao":
        d = (smooth_trajectory(rng, x, t), smooth_field(rng, x))
        deriv = (lambda u, th, v, xi: op.deriv(u, th, v, xi, 0).scaled(1.1)) if mutate else None
    else:
        d = 5.0 * smooth_field(rng, x)
        deriv = (lambda th, xi: 1.1 * op.deriv(th, xi, 0)) if mutate else None
    return fd_derivative_slope(op, point, d, deriv=deriv).slope


def analytic_forward_error():
    """Linear case against ``(1 - exp(-pi^2 t)) / pi^2 sin(pi x)`` at ``t = T``."""
    p = Problem.build(form="none")
    x, T = p.space.x, p.time.T
    u = solve_forward(np.sin(np.pi * x), p)
    exact = (1.0 - np.exp(-np.pi ** 2 * T)) / np.pi ** 2 * np.sin(np.pi * x)
    return float(np.max(np.abs(u[-1] - exact)))


def self_convergence_order(gamma=3.0, n_interior=49, base_steps=25, ref_factor=32):
    """Observed order in ``dt`` against a fine-in-time reference."""
    ref_p = Problem.build(n_interior=n_interior, n_steps=base_steps * ref_factor, gamma=gamma)
    theta = truth_profile(ref_p.space.x)
    ref = solve_forward(theta, ref_p)
    errs = []
    for m in (1, 2, 4):
        p = Problem.build(n_interior=n_interior, n_steps=base_steps * m, gamma=gamma)
        u = solve_forward(theta, p)
        stride = ref_factor // m
        d = u - ref[::stride]
        errs.append(np.sqrt(p.time.dt * np.sum(p.ops.inner_h(d, d))))
    errs = np.array(errs)
    return float(np.mean(np.log2(errs[:-1] / errs[1:]))), errs


def tcc_scaling(setting, radii=(8.0, 4.0, 2.0, 1.0), samples=10, seeds=range(5)):
    """Median (over seeds) sampled cone coefficient for shrinking radii."""
    p = Problem.build()
    theta = truth_profile(p.space.x)
    center = solve_forward(theta, p) if setting == "aao" else theta
    med = []
    for r in radii:
        med.append(np.median([tcc_estimate(p, setting, center, r, samples, s).max_ratio
                              for s in seeds]))
    return np.array(med)


def run_suite():
    checks = []
    for setting in ("aao", "reduced"):
        mm = adjoint_refinement(setting)
        checks.append(Check(f"{setting} adjoint mismatch, desk grid", mm[0], "<= 5e-2", mm[0] <= 5e-2))
        ratio = float(np.min(mm[:-1] / mm[1:]))
        checks.append(Check(f"{setting} adjoint mismatch refinement factor", ratio, ">= 1.8", ratio >= 1.8))
        p = Problem.build(n_interior=5, n_steps=8, form="none")
        op, point = _operator(p, setting, adjoint="transpose")
        dense = max(adjoint_mismatch(op, point, 10, 0, mode="dense"), adjoint_mismatch(op, point, 10, 0))
        checks.append(Check(f"{setting} transpose adjoint vs dense oracle", dense, "<= 1e-10", dense <= 1e-10))
        s = taylor_slope(setting)
        checks.append(Check(f"{setting} Taylor remainder slope", s, "in [1.9, 2.1]", 1.9 <= s <= 2.1))
        s = taylor_slope(setting, mutate=True)
        checks.append(Check(f"{setting} mutated derivative slope", s, "about 1", abs(s - 1) < 0.2))
        med = tcc_scaling(setting)
        mono = bool(np.all(np.diff(med) < 0))
        checks.append(Check(f"{setting} cone coefficient at radius 8 (monotone in radius: {mono})",
                            med[0], "decreasing", mono))
    err = analytic_forward_error()
    checks.append(Check("forward solver analytic error", err, "<= 2e-3", err <= 2e-3))
    order, _ = self_convergence_order()
    checks.append(Check("forward solver order in dt", order, "in [0.8, 1.2]", 0.8 <= order <= 1.2))
    return checks


def u_norm(u, problem):
    return float(np.sqrt(u_inner(u, u, problem.ops, problem.time.dt)))
