"""scikit-learn style wrapper around the loping Landweber-Kaczmarz iteration."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .kaczmarz import IterationConfig, run
from .model import ObservationOperator, Problem
from .noise import data_norm, observe
from .solvers import solve_forward


class LopingLandweberKaczmarz(BaseEstimator):
    """Identify the source ``theta`` in ``u' = Lap u - Phi(u) + theta`` from observations.

    Parameters mirror :class:`~.kaczmarz.IterationConfig` and
    :meth:`~.model.Problem.build`.  ``obs_times`` (time-node indices) switches
    to discrete observation, ``mask`` (space-node indices) to partial
    observation.

    Attributes
    ----------
    theta_ : ndarray
        Reconstructed source.
    u_ : ndarray
        State at ``theta_`` (reduced) or the state iterate (all-at-once).
    log_ : IterationLog
    status_ : str
    n_iter_ : int
    problem_ : Problem
    """

    def __init__(self, setting="reduced", scheme="standard", tau=2.5, step_rule="power_estimate",
                 mu=1.0, safety=0.9, power_iters=20, warm_iters=2, refresh_cycles=1,
                 max_cycles=10_000, adjoint="formula", n_interior=99, n_steps=101, T=0.1,
                 n_sub=5, gamma=3.0, form="power", obs_times=None, mask=None,
                 point_weighting="spacing", seed=0):
        self.setting = setting
        self.scheme = scheme
        self.tau = tau
        self.step_rule = step_rule
        self.mu = mu
        self.safety = safety
        self.power_iters = power_iters
        self.warm_iters = warm_iters
        self.refresh_cycles = refresh_cycles
        self.max_cycles = max_cycles
        self.adjoint = adjoint
        self.n_interior = n_interior
        self.n_steps = n_steps
        self.T = T
        self.n_sub = n_sub
        self.gamma = gamma
        self.form = form
        self.obs_times = obs_times
        self.mask = mask
        self.point_weighting = point_weighting
        self.seed = seed

    def _build_problem(self):
        obs = ObservationOperator(
            mask=None if self.mask is None else tuple(self.mask),
            times=None if self.obs_times is None else tuple(self.obs_times))
        return Problem.build(self.n_interior, self.n_steps, self.T, self.n_sub, self.gamma,
                             self.form, obs, point_weighting=self.point_weighting)

    def _iteration_config(self):
        return IterationConfig(
            setting=self.setting, scheme=self.scheme, tau=self.tau, step_rule=self.step_rule,
            mu=self.mu, safety=self.safety, power_iters=self.power_iters,
            warm_iters=self.warm_iters, refresh_cycles=self.refresh_cycles,
            max_cycles=self.max_cycles, adjoint=self.adjoint, seed=self.seed)

    def _check_data(self, Y, problem):
        Y = check_array(Y, ensure_2d=True, dtype=np.float64)
        n_slots = len(problem.obs.times) if problem.obs.is_discrete else problem.time.n_steps + 1
        if Y.shape != (n_slots, problem.n):
            raise ValueError(f"observations must have shape {(n_slots, problem.n)}, got {Y.shape}")
        return Y

    def fit(self, Y, deltas, theta0=None, theta_true=None, callback=None):
        """Run the iteration on observations ``Y`` with per-equation noise levels ``deltas``."""
        problem = self._build_problem()
        config = self._iteration_config()
        Y = self._check_data(Y, problem)
        deltas = check_array(np.atleast_1d(deltas), ensure_2d=False, dtype=np.float64)
        result = run(problem, Y, deltas, config, theta0=theta0, theta_true=theta_true,
                     callback=callback)
        self.problem_ = problem
        self.theta_ = result.theta
        self.u_ = result.u
        self.log_ = result.log
        self.status_ = result.status
        self.n_iter_ = result.log.n_loops
        return self

    def predict(self, X=None):
        """Observations predicted by the model at ``theta_`` (``X`` is ignored)."""
        check_is_fitted(self, "theta_")
        return observe(self.problem_, solve_forward(self.theta_, self.problem_))

    def score(self, Y, y=None):
        """Negative relative data misfit of the fitted source."""
        check_is_fitted(self, "theta_")
        Y = self._check_data(Y, self.problem_)
        ref = data_norm(Y, self.problem_)
        return -data_norm(self.predict() - Y, self.problem_) / (ref if ref > 0 else 1.0)
