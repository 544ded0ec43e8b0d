"""Semilinear source model ``u' = Lap u - Phi(u) + theta`` and its observations."""

from dataclasses import dataclass

import numpy as np

from .discretization import GelfandOps, SpaceGrid, TimeGrid

PHI_FORMS = ("power", "signed_power", "none")
POINT_WEIGHTINGS = ("spacing", "unit")


@dataclass(frozen=True)
class Nonlinearity:
    """Reaction term ``Phi``.

    ``power`` is ``u**gamma`` (meant for odd integer gamma), ``signed_power``
    is ``|u|**(gamma-1) * u`` and ``none`` switches the reaction off.
    """

    gamma: float = 3.0
    form: str = "power"

    def __post_init__(self):
        if self.form not in PHI_FORMS:
            raise ValueError(f"unknown nonlinearity form {self.form!r}")
        if self.gamma < 1:
            raise ValueError("gamma must be >= 1")

    @property
    def is_linear(self):
        return self.form == "none"

    def __call__(self, u):
        return phi_eval(u, self)


def phi_eval(u, phi):
    u = np.asarray(u, dtype=float)
    g = phi.gamma
    if phi.form == "none":
        return np.zeros_like(u)
    if phi.form == "power":
        return u ** g
    return np.abs(u) ** (g - 1) * u


def phi_prime(u, phi):
    u = np.asarray(u, dtype=float)
    g = phi.gamma
    if phi.form == "none":
        return np.zeros_like(u)
    if g == 1:
        return np.ones_like(u)
    if phi.form == "power":
        return g * u ** (g - 1)
    return g * np.abs(u) ** (g - 1)


def phi_second(u, phi):
    u = np.asarray(u, dtype=float)
    g = phi.gamma
    if phi.form == "none" or g == 1:
        return np.zeros_like(u)
    if g == 2 and phi.form == "power":
        return np.full_like(u, 2.0)
    if phi.form == "power":
        return g * (g - 1) * u ** (g - 2)
    # d/du (g |u|^(g-1)) = g (g-1) |u|^(g-2) sign(u)
    return g * (g - 1) * np.abs(u) ** (g - 2) * np.sign(u)


@dataclass(frozen=True)
class ObservationOperator:
    """Linear observation ``y = C u``.

    ``mask`` restricts to a set of space nodes (None observes all of them),
    ``times`` selects time-node indices for discrete measurements (None means
    continuous observation on every node).
    """

    mask: tuple = None
    times: tuple = None

    def __post_init__(self):
        if self.mask is not None:
            mask = tuple(sorted(int(i) for i in self.mask))
            if not mask:
                raise ValueError("observation mask must be nonempty")
            object.__setattr__(self, "mask", mask)
        if self.times is not None:
            times = tuple(int(k) for k in self.times)
            if not times or any(b <= a for a, b in zip(times, times[1:])) or times[0] < 1:
                raise ValueError("observation times must be strictly increasing and >= 1")
            object.__setattr__(self, "times", times)

    @classmethod
    def full(cls):
        return cls()

    @classmethod
    def subdomain(cls, mask):
        return cls(mask=mask)

    @classmethod
    def time_discrete(cls, times, mask=None):
        return cls(mask=mask, times=times)

    @classmethod
    def uniform_times(cls, n_points, n_steps, mask=None):
        """``n_points`` observation instants uniformly spread on (0, T]."""
        if not 1 <= n_points <= n_steps:
            raise ValueError("need 1 <= n_points <= n_steps")
        times = [int(round(i * n_steps / n_points)) for i in range(1, n_points + 1)]
        return cls(mask=mask, times=times)

    @property
    def kind(self):
        if self.times is not None:
            return "time_discrete"
        return "full" if self.mask is None else "subdomain"

    @property
    def is_discrete(self):
        return self.times is not None

    def mask_vector(self, n):
        if self.mask is None:
            return np.ones(n)
        if self.mask[-1] >= n or self.mask[0] < 0:
            raise IndexError("observation mask outside the space grid")
        m = np.zeros(n)
        m[list(self.mask)] = 1.0
        return m

    def check(self, n_steps):
        if self.times is not None and self.times[-1] > n_steps:
            raise IndexError(f"observation time index {self.times[-1]} beyond {n_steps}")

    def kaczmarz_bounds(self, n_steps):
        """Subinterval bounds with one equation per observation instant."""
        self.check(n_steps)
        return (0, *self.times[:-1], n_steps)


def obs_apply(C, u):
    """Observe a trajectory of shape ``(n_steps + 1, n)``."""
    u = np.asarray(u, dtype=float)
    C.check(u.shape[0] - 1)
    y = u * C.mask_vector(u.shape[-1])
    if C.times is not None:
        return y[list(C.times)]
    return y


def obs_adjoint(C, z, n_steps=None):
    """Dual field(s) ``C^* z``.

    Continuous data come back with the same shape; discrete data are returned
    per point unless ``n_steps`` is given, in which case they are scattered
    onto a zero trajectory of ``n_steps + 1`` nodes.
    """
    z = np.asarray(z, dtype=float)
    out = z * C.mask_vector(z.shape[-1])
    if C.times is not None and n_steps is not None:
        C.check(n_steps)
        full = np.zeros((n_steps + 1, z.shape[-1]))
        full[list(C.times)] = out
        return full
    return out


@dataclass(frozen=True)
class Problem:
    """Everything that defines the forward model on a grid.

    ``u0`` is the (theta-independent) initial state; ``None`` means zero.
    For discrete observations the Kaczmarz split follows the observation
    instants, otherwise ``time.bounds``.  ``point_weighting`` sets the weight
    of each discrete measurement in the data norm: ``"spacing"`` uses the
    time span ``t_i - t_{i-1}`` it stands for (so the norm approaches the
    continuous one as measurements get denser), ``"unit"`` plain sums.
    """

    space: SpaceGrid
    time: TimeGrid
    phi: Nonlinearity = Nonlinearity()
    obs: ObservationOperator = ObservationOperator()
    u0: np.ndarray = None
    point_weighting: str = "spacing"

    def __post_init__(self):
        if self.point_weighting not in POINT_WEIGHTINGS:
            raise ValueError(f"unknown point weighting {self.point_weighting!r}")
        u0 = np.zeros(self.space.n_interior) if self.u0 is None else np.asarray(self.u0, dtype=float)
        if u0.shape != (self.space.n_interior,) or not np.all(np.isfinite(u0)):
            raise ValueError("u0 must be a finite field on the space grid")
        object.__setattr__(self, "u0", u0)
        self.obs.check(self.time.n_steps)
        object.__setattr__(self, "ops", GelfandOps(self.space))

    @classmethod
    def build(cls, n_interior=99, n_steps=101, T=0.1, n_sub=5, gamma=3.0,
              form="power", obs=None, u0=None, point_weighting="spacing"):
        obs = obs or ObservationOperator()
        time = TimeGrid.uniform(n_steps, T, n_sub)
        if obs.is_discrete:
            time = time.with_bounds(obs.kaczmarz_bounds(n_steps))
        return cls(SpaceGrid(n_interior), time, Nonlinearity(gamma, form), obs, u0, point_weighting)

    @property
    def n(self):
        return self.space.n_interior

    @property
    def point_weights(self):
        """Data-norm weight of each discrete measurement."""
        if not self.obs.is_discrete:
            raise ValueError("point weights need discrete observations")
        if self.point_weighting == "unit":
            return np.ones(len(self.obs.times))
        return np.diff((0, *self.obs.times)) * self.time.dt

    @property
    def mask(self):
        return self.obs.mask_vector(self.n)

    def inner_z(self, a, b):
        """Observation-space inner product: lumped mass restricted to the mask."""
        return self.space.h * np.sum(np.asarray(a) * np.asarray(b) * self.mask, axis=-1)


def f_eval(u, theta, problem):
    """Model right-hand side ``Lap_h u - Phi(u) + theta`` (dual field)."""
    return problem.ops.laplacian(u) - phi_eval(u, problem.phi) + np.asarray(theta)


def f_du_apply(u, v, problem):
    return problem.ops.laplacian(v) - phi_prime(u, problem.phi) * v


def f_du_adjoint_apply(u, p, problem):
    # Lap_h is symmetric for the lumped-mass pairing and Phi'(u) acts pointwise
    return problem.ops.laplacian(p) - phi_prime(u, problem.phi) * p


def f_dtheta_apply(xi):
    return np.array(xi, dtype=float)


def f_dtheta_adjoint(p):
    return np.array(p, dtype=float)
