"""Loping Landweber-Kaczmarz iteration for the all-at-once and reduced settings."""

from dataclasses import asdict, dataclass, field
import time

import numpy as np

from .aao import AllAtOnceOperator
from .noise import data_norm
from .reduced import ReducedOperator
from .solvers import SolverError, solve_forward

SETTINGS = ("aao", "reduced")
STEP_RULES = ("power_estimate", "fixed")
STATUSES = ("converged", "cycle_cap", "solver_failure", "non_finite")


@dataclass(frozen=True)
class IterationConfig:
    """Knobs of the iteration.

    ``mu`` is used by the ``fixed`` step rule and as the fallback when the
    power estimate finds a vanishing operator.  The first estimate of every
    equation runs ``power_iters`` steps from a random start; each later one
    (every ``refresh_cycles`` cycles) restarts from the previous dominant
    vector and runs ``warm_iters`` steps.
    """

    setting: str = "reduced"
    scheme: str = "standard"
    tau: float = 2.5
    step_rule: str = "power_estimate"
    mu: float = 1.0
    safety: float = 0.9
    power_iters: int = 20
    warm_iters: int = 2
    refresh_cycles: int = 1
    max_cycles: int = 10_000
    floor: float = 1e-12
    adjoint: str = "formula"
    seed: int = 0

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ValueError(f"unknown setting {self.setting!r}")
        if self.step_rule not in STEP_RULES:
            raise ValueError(f"unknown step rule {self.step_rule!r}")
        if not self.tau > 2:
            raise ValueError("tau must exceed 2")
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not 0 < self.safety <= 1:
            raise ValueError("safety must lie in (0, 1]")
        if min(self.power_iters, self.warm_iters, self.refresh_cycles, self.max_cycles) < 1:
            raise ValueError("power_iters, warm_iters, refresh_cycles and max_cycles must be >= 1")


@dataclass
class IterationLog:
    """Per-iteration records plus the run summary."""

    n_equations: int
    rows: list = field(default_factory=list)
    status: str = "running"
    message: str = ""
    cpu_seconds: float = 0.0
    final_rel_error: float = float("nan")
    step_sizes: list = field(default_factory=list)

    COLUMNS = ("k", "cycle", "j", "w", "residual", "delta", "mu", "rel_error", "wall")

    @property
    def weights(self):
        return np.array([r["w"] for r in self.rows], dtype=int)

    @property
    def n_loops(self):
        return len(self.rows)

    @property
    def n_updates(self):
        return int(self.weights.sum()) if self.rows else 0

    def updates_per_cycle(self):
        w = self.weights
        n_cycles = -(-len(w) // self.n_equations)
        padded = np.zeros(n_cycles * self.n_equations, dtype=int)
        padded[:len(w)] = w
        return padded.reshape(n_cycles, self.n_equations).sum(axis=1)

    def summary(self):
        return {
            "status": self.status,
            "k_star": self.n_loops,
            "loops": self.n_loops,
            "updates": self.n_updates,
            "cpu_s": self.cpu_seconds,
            "rel_error": self.final_rel_error,
            "mean_iter_s": self.cpu_seconds / max(self.n_loops, 1),
        }


@dataclass
class RunResult:
    theta: np.ndarray
    u: np.ndarray
    log: IterationLog
    config: IterationConfig

    @property
    def status(self):
        return self.log.status


def loping_weight(residual_norm, delta, tau, floor=0.0):
    """1 if the residual exceeds ``tau * delta`` (or ``floor`` on exact data), else 0."""
    if residual_norm < 0 or delta < 0 or tau < 0:
        raise ValueError("loping weight needs nonnegative arguments")
    if delta == 0:
        return int(residual_norm > floor)
    return int(residual_norm >= tau * delta)


def power_norm_squared(apply_normal, inner, x0, iters, return_vector=False):
    """Largest eigenvalue of a self-adjoint positive ``apply_normal`` by power iteration."""
    x = x0
    nx = np.sqrt(inner(x, x))
    if nx == 0:
        return (0.0, x) if return_vector else 0.0
    x = _scale(x, 1.0 / nx)
    lam = 0.0
    for _ in range(iters):
        y = apply_normal(x)
        lam = inner(x, y)
        ny = np.sqrt(inner(y, y))
        if not ny > 0:
            lam = 0.0
            break
        x = _scale(y, 1.0 / ny)
    lam = float(max(lam, 0.0))
    return (lam, x) if return_vector else lam


def _scale(x, c):
    if isinstance(x, tuple):
        return tuple(c * a for a in x)
    return c * x


def _make_operator(problem, config):
    if config.setting == "aao":
        return AllAtOnceOperator(problem, config.scheme, config.adjoint)
    return ReducedOperator(problem, config.scheme, config.adjoint)


def _normal_map(op, point, j):
    if isinstance(op, AllAtOnceOperator):
        u, theta = point
        return lambda d: op.apply_normal(u, theta, d[0], d[1], j)
    return lambda d: op.apply_normal(point, d, j)


def _random_direction(op, point, rng):
    n = op.problem.n
    if isinstance(op, AllAtOnceOperator):
        return (rng.standard_normal(point[0].shape), rng.standard_normal(n))
    return rng.standard_normal(n)


def estimate_step_size(op, point, j, config, rng=None, x0=None, iters=None, return_vector=False):
    """Step ``safety / ||F_j'||^2`` from a power estimate, or the fallback ``mu``.

    ``x0`` warm-starts the power iteration (random start otherwise) and
    ``iters`` overrides ``config.power_iters``.
    """
    if config.step_rule == "fixed":
        return (config.mu, x0) if return_vector else config.mu
    if x0 is None:
        rng = np.random.default_rng(config.seed) if rng is None else rng
        x0 = _random_direction(op, point, rng)
    iters = config.power_iters if iters is None else iters
    lam, x = power_norm_squared(_normal_map(op, point, j), op.domain_inner, x0, iters, True)
    mu = config.mu if not np.isfinite(lam) or lam <= 0 else config.safety / lam
    if not (np.isfinite(lam) and lam > 0):
        x = None
    return (mu, x) if return_vector else mu


def run(problem, data, deltas, config=IterationConfig(), theta0=None, theta_true=None,
        u_init=None, callback=None, iterate_hook=None):
    """Loping Landweber-Kaczmarz iteration.

    Parameters
    ----------
    problem : Problem
    data : ndarray
        Noisy observations on every slot, shape ``(n_slots, n)``.
    deltas : sequence of float
        Noise level of each equation of the cycle.
    config : IterationConfig
    theta0 : ndarray, optional
        Starting parameter (zero by default).
    theta_true : ndarray, optional
        Used only for the logged relative error.
    u_init : ndarray, optional
        Starting state of the all-at-once iteration; ``S(theta0)`` by default.
    callback : callable, optional
        Called with every new log row (streaming output).
    iterate_hook : callable, optional
        Called as ``iterate_hook(row, theta, u)`` after every iteration.

    Returns
    -------
    RunResult
    """
    op = _make_operator(problem, config)
    n = op.n_equations
    deltas = np.asarray(deltas, dtype=float)
    if deltas.shape != (n,):
        raise ValueError(f"need {n} noise levels, got {deltas.shape}")
    data = np.asarray(data, dtype=float)
    theta = np.zeros(problem.n) if theta0 is None else np.array(theta0, dtype=float)
    ops = problem.ops
    if theta_true is not None:
        true_norm = float(np.sqrt(ops.inner_h(theta_true, theta_true)))

    def rel_error(th):
        if theta_true is None or true_norm == 0:
            return float("nan")
        d = th - theta_true
        return float(np.sqrt(ops.inner_h(d, d))) / true_norm

    floor = config.floor * data_norm(data, problem)
    log = IterationLog(n)
    rng = np.random.default_rng(config.seed)
    aao = config.setting == "aao"
    u = None
    t_start = time.perf_counter()
    zeros_run = 0
    mus = np.full(n, config.mu)
    vectors = [None] * n
    try:
        if aao:
            u = solve_forward(theta, problem) if u_init is None else np.array(u_init, dtype=float)
        k = 0
        for cycle in range(config.max_cycles):
            if cycle % config.refresh_cycles == 0:
                point = (u, theta) if aao else theta
                for j in range(n):
                    warm = vectors[j] is not None
                    mus[j], vectors[j] = estimate_step_size(
                        op, point, j, config, rng, x0=vectors[j],
                        iters=config.warm_iters if warm else None, return_vector=True)
                log.step_sizes.append(mus.copy())
            for j in range(n):
                if aao:
                    res = op.residual(u, theta, data, j)
                else:
                    res = op.residual(theta, data, j)
                parts = (res.w, res.z, 0.0 if res.h is None else res.h) if aao else (res,)
                if not all(np.all(np.isfinite(a)) for a in parts):
                    log.status = "non_finite"
                    log.message = f"non-finite residual at iteration {k} (equation {j})"
                    raise StopIteration
                rnorm = op.norm(res) if aao else op.norm(res, j)
                w = loping_weight(rnorm, deltas[j], config.tau, floor)
                if w:
                    if aao:
                        du, dth = op.adjoint(u, theta, res, j)
                        u_new, th_new = u - mus[j] * du, theta - mus[j] * dth
                        ok = np.all(np.isfinite(u_new)) and np.all(np.isfinite(th_new))
                    else:
                        th_new = theta - mus[j] * op.adjoint(theta, res, j)
                        ok = np.all(np.isfinite(th_new))
                    if not ok:
                        log.status = "non_finite"
                        log.message = f"non-finite update at iteration {k} (equation {j})"
                        raise StopIteration
                    theta = th_new
                    if aao:
                        u = u_new
                    zeros_run = 0
                else:
                    zeros_run += 1
                row = {"k": k, "cycle": cycle, "j": j, "w": w, "residual": rnorm,
                       "delta": float(deltas[j]), "mu": float(mus[j]),
                       "rel_error": rel_error(theta), "wall": time.perf_counter() - t_start}
                log.rows.append(row)
                if callback is not None:
                    callback(row)
                if iterate_hook is not None:
                    iterate_hook(row, theta, u)
                k += 1
                if zeros_run >= n:
                    log.status = "converged"
                    raise StopIteration
        log.status = "cycle_cap"
        log.message = f"no full cycle without updates within {config.max_cycles} cycles"
    except StopIteration:
        pass
    except SolverError as exc:
        log.status = "solver_failure"
        log.message = f"iteration {len(log.rows)}: {exc}"
    log.cpu_seconds = time.perf_counter() - t_start
    log.final_rel_error = rel_error(theta)
    if not aao and log.status != "solver_failure":
        try:
            u = op.state(theta)
        except SolverError:
            u = None
    return RunResult(theta, u, log, config)


def run_landweber(problem, data, delta, config=IterationConfig(), **kwargs):
    """Plain Landweber iteration: the single-equation cycle."""
    cfg = IterationConfig(**{**asdict(config), "scheme": "full"})
    return run(problem, data, [delta], cfg, **kwargs)
