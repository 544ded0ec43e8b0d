"""Verification instruments: adjoint identity, Taylor tests, cone-condition sampling, errors."""

from dataclasses import dataclass, field

import numpy as np

from .aao import AllAtOnceOperator, ResidualTriple
from .model import f_eval, phi_eval, phi_prime
from .reduced import ReducedOperator
from .solvers import solve_forward, solve_sensitivity


def smooth_field(rng, x, n_modes=3):
    """Random combination of the first sine modes on the space grid."""
    c = rng.standard_normal(n_modes)
    return sum(c[i] * np.sin((i + 1) * np.pi * x) for i in range(n_modes))


def smooth_trajectory(rng, x, t, n_modes=3):
    """Random sine modes in space with quadratic-in-time coefficients."""
    a = rng.standard_normal((n_modes, 3))
    out = np.zeros((len(t), len(x)))
    for i in range(n_modes):
        out += np.outer(a[i, 0] + a[i, 1] * t + a[i, 2] * t ** 2, np.sin((i + 1) * np.pi * x))
    return out


def _observed(problem, z):
    return z[list(problem.obs.times)] if problem.obs.is_discrete else z


def _random_range(op, j, rng):
    p = op.problem
    x, t = p.space.x, p.time.t
    eq = op.equation(j)
    act = eq.active_slots
    z = np.zeros((len(eq.slot_nodes), p.n))
    z[act] = (_observed(p, smooth_trajectory(rng, x, t)) * p.mask)[act]
    if isinstance(op, ReducedOperator):
        return z
    tr = op._zero_triple(eq)
    m = eq.model_nodes
    tr.w[m] = smooth_trajectory(rng, x, t)[m]
    if eq.has_h:
        tr.h = smooth_field(rng, x)
    tr.z = z
    return tr


# dense assembly ----------------------------------------------------------


def _flatten_triple(tr):
    parts = [tr.w.ravel()]
    if tr.h is not None:
        parts.append(tr.h)
    parts.append(tr.z.ravel())
    return np.concatenate(parts)


def _unflatten_triple(vec, like):
    nw = like.w.size
    w = vec[:nw].reshape(like.w.shape)
    pos = nw
    h = None
    if like.h is not None:
        h = vec[pos:pos + like.h.size]
        pos += like.h.size
    z = vec[pos:].reshape(like.z.shape)
    return ResidualTriple(w, h, z, like.eq)


def dense_derivative(op, point, j):
    """Derivative of equation ``j`` as a matrix in nodal coordinates."""
    p = op.problem
    if isinstance(op, ReducedOperator):
        cols = [op.deriv(point, e, j).ravel() for e in np.eye(p.n)]
        return np.array(cols).T
    u, theta = point
    nu = u.size
    cols = []
    for i in range(nu + p.n):
        e = np.zeros(nu + p.n)
        e[i] = 1.0
        cols.append(_flatten_triple(op.deriv(u, theta, e[:nu].reshape(u.shape), e[nu:], j)))
    return np.array(cols).T


def _gram(inner, basis):
    n = len(basis)
    G = np.empty((n, n))
    for a in range(n):
        for b in range(a, n):
            G[a, b] = G[b, a] = inner(basis[a], basis[b])
    return G


def dense_adjoint(op, point, j):
    """Hilbert adjoint ``G_X^{-1} J^T G_Y`` assembled from Gram matrices."""
    p = op.problem
    J = dense_derivative(op, point, j)
    if isinstance(op, ReducedOperator):
        eq = op.equation(j)
        shape = (len(eq.slot_nodes), p.n)
        Gx = p.space.h * np.eye(p.n)
        rows = [e.reshape(shape) for e in np.eye(J.shape[0])]
        Gy = _gram(lambda a, b: op.inner(a, b, j), rows)
        return np.linalg.solve(Gx, J.T @ Gy)
    u, theta = point
    nu = u.size
    dom = [(e[:nu].reshape(u.shape), e[nu:]) for e in np.eye(nu + p.n)]
    Gx = _gram(op.domain_inner, dom)
    like = op._zero_triple(op.equation(j))
    rng_basis = [_unflatten_triple(e, like) for e in np.eye(J.shape[0])]
    Gy = _gram(op.range_inner, rng_basis)
    return np.linalg.solve(Gx, J.T @ Gy)


# adjoint identity --------------------------------------------------------


def adjoint_mismatch(op, point, trials=5, seed=0, mode="operator"):
    """Largest relative gap ``|<F'd, y> - <d, F'^* y>| / (||F'd|| ||y|| + eps)``.

    Trials cycle through the equations of ``op``.  ``mode="operator"`` uses the
    operator's own adjoint, ``"dense"`` the Gram-matrix adjoint of the
    assembled derivative.
    """
    if mode not in ("operator", "dense"):
        raise ValueError(f"unknown mismatch mode {mode!r}")
    p = op.problem
    rng = np.random.default_rng(seed)
    x, t = p.space.x, p.time.t
    reduced = isinstance(op, ReducedOperator)
    eps = np.finfo(float).tiny
    worst = 0.0
    dense = {}
    for trial in range(trials):
        j = trial % op.n_equations
        y = _random_range(op, j, rng)
        if reduced:
            d = smooth_field(rng, x)
            Fd = op.deriv(point, d, j)
            lhs = op.inner(Fd, y, j)
            if mode == "dense":
                A = dense.setdefault(j, dense_adjoint(op, point, j))
                adj = A @ y.ravel()
            else:
                adj = op.adjoint(point, y, j)
            rhs = op.domain_inner(d, adj)
            scale = op.norm(Fd, j) * op.norm(y, j)
        else:
            u, theta = point
            d = (smooth_trajectory(rng, x, t), smooth_field(rng, x))
            Fd = op.deriv(u, theta, d[0], d[1], j)
            lhs = op.range_inner(Fd, y)
            if mode == "dense":
                A = dense.setdefault(j, dense_adjoint(op, point, j))
                vec = A @ _flatten_triple(y)
                adj = (vec[:u.size].reshape(u.shape), vec[u.size:])
            else:
                adj = op.adjoint(u, theta, y, j)
            rhs = op.domain_inner(d, adj)
            scale = op.norm(Fd) * op.norm(y)
        worst = max(worst, abs(lhs - rhs) / (scale + eps))
    return float(worst)


# Taylor test -------------------------------------------------------------


@dataclass
class TaylorResult:
    eps: np.ndarray
    remainders: np.ndarray
    slope: float
    linear: bool = False


def fd_derivative_slope(op, point, direction, eps=(1e-2, 1e-3, 1e-4, 1e-5), deriv=None, j=0):
    """Log-log slope of ``||F(x + e d) - F(x) - e F'(x) d||`` over the ladder ``eps``.

    ``deriv`` replaces the operator's derivative (mutation testing).  When
    every remainder sits at round-off level the map is treated as linear and
    the slope is reported as nan.
    """
    eps = np.asarray(eps, dtype=float)
    p = op.problem
    if isinstance(op, ReducedOperator):
        zero = np.zeros((len(op.equation(j).slot_nodes), p.n))
        F = lambda th: op.residual(th, zero, j)
        deriv = deriv or (lambda th, xi: op.deriv(th, xi, j))
        F0, D = F(point), deriv(point, direction)
        norm = lambda z: op.norm(z, j)
        rem = [norm(F(point + e * direction) - F0 - e * D) for e in eps]
        ref = norm(F0) + norm(D)
    else:
        (u, theta), (v, xi) = point, direction
        zero = _observed(p, np.zeros_like(u))
        F = lambda uu, th: op.residual(uu, th, zero, j)
        deriv = deriv or (lambda uu, th, vv, xx: op.deriv(uu, th, vv, xx, j))
        F0, D = F(u, theta), deriv(u, theta, v, xi)
        rem = [op.norm(F(u + e * v, theta + e * xi) - F0 - D.scaled(e)) for e in eps]
        ref = op.norm(F0) + op.norm(D)
    rem = np.array(rem)
    if np.all(rem <= 1e-11 * max(ref, 1.0)):
        return TaylorResult(eps, rem, float("nan"), linear=True)
    slope = np.polyfit(np.log(eps), np.log(rem), 1)[0]
    return TaylorResult(eps, rem, float(slope))


# tangential cone ---------------------------------------------------------


@dataclass
class TangentialConeEstimate:
    samples: int
    max_ratio: float
    neighborhood_radius: float
    setting: str
    seed: int
    ratios: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _l2_time(values, dt):
    # trapezoid in time of per-node squared norms
    w = np.full(len(values), dt)
    w[0] = w[-1] = dt / 2
    return float(np.sqrt(np.sum(w * values)))


def tcc_estimate(problem, setting, center, radius, samples=20, seed=0):
    """Sampled tangential-cone coefficient in a ball around ``center``.

    ``setting="aao"``: ``center`` is a trajectory ``u``; the ratio is
    ``||Phi(v) - Phi(u) - Phi'(u)(v - u)||_{L2(V*)} / ||v - u||_{L2(Z)}`` with
    ``v - u`` a random smooth trajectory of ``U``-norm ``radius``.
    ``setting="reduced"``: ``center`` is a parameter ``theta``; the ratio is
    ``||S(t) - S(theta) - S'(theta)(t - theta)||_Y / ||S(t) - S(theta)||_Y``
    with ``t - theta`` random smooth of ``X``-norm ``radius``.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    p = problem
    ops = p.ops
    rng = np.random.default_rng(seed)
    x, t, dt = p.space.x, p.time.t, p.time.dt
    ratios = []
    if setting == "aao":
        from .aao import u_inner
        u = np.asarray(center, dtype=float)
        for _ in range(samples):
            d = smooth_trajectory(rng, x, t)
            d *= radius / np.sqrt(u_inner(d, d, ops, dt))
            rem = phi_eval(u + d, p.phi) - phi_eval(u, p.phi) - phi_prime(u, p.phi) * d
            num = _l2_time(ops.norm_vstar(rem) ** 2, dt)
            den = _l2_time(p.inner_z(d, d), dt)
            ratios.append(num / den if den > 0 else 0.0)
    elif setting == "reduced":
        theta = np.asarray(center, dtype=float)
        u = solve_forward(theta, p)
        full = ReducedOperator(p, "full")
        for _ in range(samples):
            xi = smooth_field(rng, x)
            xi *= radius / np.sqrt(ops.inner_h(xi, xi))
            diff = solve_forward(theta + xi, p) - u
            rem = diff - solve_sensitivity(theta, u, xi, p)
            num = full.norm(full._observe(rem), 0)
            den = full.norm(full._observe(diff), 0)
            ratios.append(num / den if den > 0 else 0.0)
    else:
        raise ValueError(f"unknown setting {setting!r}")
    ratios = np.array(ratios)
    return TangentialConeEstimate(samples, float(ratios.max()), float(radius), setting, seed, ratios)


# errors ------------------------------------------------------------------


def error_metrics(theta, theta_true, problem):
    """Relative ``X``-norm error and largest nodal error."""
    d = np.asarray(theta, dtype=float) - np.asarray(theta_true, dtype=float)
    ops = problem.ops
    ref = np.sqrt(ops.inner_h(theta_true, theta_true))
    rel = float(np.sqrt(ops.inner_h(d, d)) / ref) if ref > 0 else float("nan")
    return {"rel_error": rel, "max_error": float(np.max(np.abs(d)))}


def direct_inversion_check(u, problem, k):
    """Source recovered from a trajectory at node ``k``: ``u' - Lap u + Phi(u)``."""
    u = np.asarray(u, dtype=float)
    if not 1 <= k <= problem.time.n_steps:
        raise IndexError("need 1 <= k <= n_steps")
    du = (u[k] - u[k - 1]) / problem.time.dt
    return du - f_eval(u[k], np.zeros(problem.n), problem)
