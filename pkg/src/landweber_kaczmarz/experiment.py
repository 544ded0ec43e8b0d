"""Synthetic identification experiment: truth profile, data, one iteration run."""

from dataclasses import dataclass

import numpy as np

from .kaczmarz import IterationConfig, run
from .model import ObservationOperator, Problem
from .noise import NoisySpec, make_truth_data, perturb

TRUTHS = ("tent", "sine", "bump")


def truth_profile(x, name="tent", amplitude=20.0):
    """Source term used to manufacture data.

    ``tent`` is the piecewise-linear hat ``amplitude * 2 min(x, 1 - x)``;
    its kink is what keeps the reconstruction error away from zero.
    """
    x = np.asarray(x, dtype=float)
    if name == "tent":
        return amplitude * 2.0 * np.minimum(x, 1.0 - x)
    if name == "sine":
        return amplitude * np.sin(np.pi * x)
    if name == "bump":
        return amplitude * np.exp(-50.0 * (x - 0.5) ** 2)
    raise ValueError(f"unknown truth profile {name!r}")


def build_problem(cfg):
    """Problem from a flat configuration mapping."""
    obs_kind = cfg["obs"]
    mask = None
    if cfg["mask"] != "all":
        lo, hi = (float(v) for v in cfg["mask"].split(":"))
        n = cfg["n_interior"]
        x = np.arange(1, n + 1) / (n + 1)
        mask = tuple(np.flatnonzero((x >= lo) & (x <= hi)))
        if not mask:
            raise ValueError(f"mask {cfg['mask']!r} selects no grid node")
    if obs_kind == "continuous":
        obs = ObservationOperator(mask=mask)
    else:
        obs = ObservationOperator.uniform_times(cfg["n_points"], cfg["n_steps"], mask=mask)
    return Problem.build(cfg["n_interior"], cfg["n_steps"], cfg["T"], cfg["n_sub"], cfg["gamma"],
                         cfg["form"], obs, point_weighting=cfg["point_weighting"])


def iteration_config(cfg, **overrides):
    keys = ("setting", "scheme", "tau", "step_rule", "mu", "safety", "power_iters",
            "warm_iters", "refresh_cycles", "max_cycles", "adjoint", "seed")
    kw = {k: cfg[k] for k in keys}
    kw.update(overrides)
    return IterationConfig(**kw)


@dataclass
class Experiment:
    problem: Problem
    theta_true: np.ndarray
    y: np.ndarray
    noisy: object

    @classmethod
    def from_config(cls, cfg, scheme=None):
        problem = build_problem(cfg)
        theta_true = truth_profile(problem.space.x, cfg["truth"], cfg["truth_amplitude"])
        y = make_truth_data(theta_true, problem)
        noisy = perturb(y, problem, NoisySpec(cfg["noise"], cfg["seed"]), scheme or cfg["scheme"])
        return cls(problem, theta_true, y, noisy)

    def run(self, config, callback=None, theta0=None, iterate_hook=None):
        return run(self.problem, self.noisy.y_delta, self.noisy.deltas, config,
                   theta0=theta0, theta_true=self.theta_true, callback=callback,
                   iterate_hook=iterate_hook)


def run_from_config(cfg, callback=None, **overrides):
    """Generate data and run one identification; returns ``(experiment, result)``."""
    it = iteration_config(cfg, **overrides)
    exp = Experiment.from_config(cfg, scheme=it.scheme)
    theta0 = None if cfg["theta0"] == 0 else np.full(exp.problem.n, float(cfg["theta0"]))
    return exp, exp.run(it, callback, theta0)
