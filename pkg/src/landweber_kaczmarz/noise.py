"""Synthetic data: exact observations from a true parameter and seeded Gaussian noise."""

from dataclasses import dataclass

import numpy as np

from .schemes import equation, n_equations
from .solvers import solve_forward

RNG_NAME = "numpy Philox4x64-10, uniform doubles in (0, 1], Box-Muller pairs, time-major order"


@dataclass(frozen=True)
class NoisySpec:
    rel_level: float = 0.05
    seed: int = 0
    target: str = "observation"

    def __post_init__(self):
        if not self.rel_level >= 0:
            raise ValueError("rel_level must be nonnegative")
        if self.target != "observation":
            raise NotImplementedError("only observation noise is generated")


@dataclass
class NoisyData:
    y: np.ndarray
    y_delta: np.ndarray
    delta_total: float
    deltas: np.ndarray
    absolute_fallback: bool = False
    rng: str = RNG_NAME


def observe(problem, u):
    """Observation of a trajectory on every slot, masked."""
    if problem.obs.is_discrete:
        return u[list(problem.obs.times)] * problem.mask
    return u * problem.mask


def make_truth_data(theta_true, problem):
    """Exact data ``C S(theta_true)``."""
    theta_true = np.asarray(theta_true, dtype=float)
    if not np.all(np.isfinite(theta_true)):
        raise ValueError("theta_true must be finite")
    return observe(problem, solve_forward(theta_true, problem))


def data_norm(z, problem, weights=None):
    """Observation-space norm with the given slot weights (whole horizon by default)."""
    if weights is None:
        weights = equation(problem, "full", 0).z_weights
    return float(np.sqrt(max(np.sum(weights * problem.inner_z(z, z)), 0.0)))


def standard_normals(shape, seed):
    """Box-Muller normals from a counter-based generator, filled time-major."""
    size = int(np.prod(shape))
    gen = np.random.Generator(np.random.Philox(seed))
    n_pairs = (size + 1) // 2
    uni = 1.0 - gen.random(2 * n_pairs)
    u1, u2 = uni[0::2], uni[1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    pairs = np.empty(2 * n_pairs)
    pairs[0::2] = r * np.cos(2.0 * np.pi * u2)
    pairs[1::2] = r * np.sin(2.0 * np.pi * u2)
    return pairs[:size].reshape(shape)


def perturb(y, problem, spec=NoisySpec(), scheme="standard"):
    """Add noise with ``||y_delta - y||_Y = rel_level * ||y||_Y``.

    Returns the realized noise levels of every equation of ``scheme``.  If the
    exact data vanish, ``rel_level`` is used as an absolute level and the
    result is flagged.
    """
    y = np.asarray(y, dtype=float)
    n_eq = n_equations(problem, scheme)
    if spec.rel_level == 0:
        return NoisyData(y, y.copy(), 0.0, np.zeros(n_eq))
    noise = standard_normals(y.shape, spec.seed) * problem.mask
    ynorm = data_norm(y, problem)
    fallback = ynorm == 0
    target = spec.rel_level * (1.0 if fallback else ynorm)
    noise *= target / data_norm(noise, problem)
    deltas = np.array([data_norm(noise, problem, equation(problem, scheme, j).z_weights)
                       for j in range(n_eq)])
    return NoisyData(y, y + noise, data_norm(noise, problem), deltas, fallback)
