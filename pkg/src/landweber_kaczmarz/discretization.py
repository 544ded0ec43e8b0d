"""Finite-difference Gelfand triple V = H^1_0(0, 1), H = L^2(0, 1), V*.

Fields are plain 1-D arrays of nodal values on the interior nodes
(homogeneous Dirichlet values are never stored).  A functional in V* is
stored through its H-representative, so the dual pairing is
``<f, v> = f^T M v`` with the lumped mass ``M = h Id``.  With that choice
both Riesz maps V* -> V reduce to ``A^{-1} M``.

Batched operations accept arrays of shape ``(n_interior,)`` or
``(m, n_interior)``; in the latter case the last axis is space.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack


class SingularSystemError(np.linalg.LinAlgError):
    """A tridiagonal system hit a zero pivot."""


@dataclass(frozen=True)
class SpaceGrid:
    """Uniform grid on (0, 1) with ``n_interior`` unknowns."""

    n_interior: int

    def __post_init__(self):
        if int(self.n_interior) < 1:
            raise ValueError("n_interior must be >= 1")

    @property
    def h(self):
        return 1.0 / (self.n_interior + 1)

    @property
    def x(self):
        return self.h * np.arange(1, self.n_interior + 1)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [0, T] with ``n_steps`` intervals.

    ``bounds`` holds node indices ``0 = b_0 < b_1 < ... < b_n = n_steps``
    splitting the horizon into Kaczmarz subintervals.
    """

    n_steps: int
    T: float
    bounds: tuple = None

    def __post_init__(self):
        if int(self.n_steps) < 1:
            raise ValueError("n_steps must be >= 1")
        if not self.T > 0:
            raise ValueError("T must be positive")
        bounds = self.bounds
        if bounds is None:
            bounds = (0, self.n_steps)
        bounds = tuple(int(b) for b in bounds)
        if bounds[0] != 0 or bounds[-1] != self.n_steps:
            raise ValueError("subinterval bounds must start at 0 and end at n_steps")
        if any(b1 <= b0 for b0, b1 in zip(bounds, bounds[1:])):
            raise ValueError("subinterval bounds must be strictly increasing")
        object.__setattr__(self, "bounds", bounds)

    @classmethod
    def uniform(cls, n_steps, T, n_sub=1):
        """Split into ``n_sub`` subintervals of (nearly) equal node counts."""
        if not 1 <= n_sub <= n_steps:
            raise ValueError("need 1 <= n_sub <= n_steps")
        bounds = [int(round(j * n_steps / n_sub)) for j in range(n_sub + 1)]
        return cls(n_steps, T, tuple(bounds))

    @property
    def dt(self):
        return self.T / self.n_steps

    @property
    def t(self):
        return self.dt * np.arange(self.n_steps + 1)

    @property
    def n_sub(self):
        return len(self.bounds) - 1

    def with_bounds(self, bounds):
        return TimeGrid(self.n_steps, self.T, tuple(bounds))


def solve_tridiag(lower, diag, upper, rhs):
    """Solve a tridiagonal system; ``rhs`` may hold several columns.

    Backed by LAPACK ``gtsv`` (Gaussian elimination with partial pivoting).
    """
    diag = np.asarray(diag, dtype=float)
    n = diag.shape[0]
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if lower.shape != (n - 1,) or upper.shape != (n - 1,) or rhs.shape[0] != n:
        raise ValueError("inconsistent tridiagonal system shapes")
    if n == 1:
        if diag[0] == 0.0:
            raise SingularSystemError("zero pivot")
        return rhs / diag[0]
    _, _, _, x, info = lapack.dgtsv(lower, diag, upper, rhs)
    if info > 0:
        raise SingularSystemError(f"zero pivot at row {info}")
    if info < 0:
        raise ValueError(f"illegal argument {-info} to gtsv")
    return x


def trapezoid_weights(k_lo, k_hi, dt, n_nodes=None):
    """Composite trapezoid weights on nodes ``k_lo..k_hi`` (zero elsewhere)."""
    if n_nodes is None:
        n_nodes = k_hi + 1
    if not 0 <= k_lo <= k_hi < n_nodes:
        raise IndexError(f"node range [{k_lo}, {k_hi}] outside 0..{n_nodes - 1}")
    w = np.zeros(n_nodes)
    if k_hi > k_lo:
        w[k_lo:k_hi + 1] = dt
        w[k_lo] = w[k_hi] = 0.5 * dt
    return w


def trapezoid_time(values, k_lo, k_hi, dt):
    """Trapezoid integral of nodal ``values`` over ``[t_{k_lo}, t_{k_hi}]``.

    ``values`` is indexed by time node along axis 0; trailing axes are kept.
    """
    values = np.asarray(values, dtype=float)
    w = trapezoid_weights(k_lo, k_hi, dt, values.shape[0])
    return np.tensordot(w, values, axes=(0, 0))


@dataclass(frozen=True)
class GelfandOps:
    """Stiffness ``A = (1/h) tridiag(-1, 2, -1)`` and lumped mass ``M = h Id``."""

    grid: SpaceGrid
    _off: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.grid.n_interior
        object.__setattr__(self, "_off", np.full(n - 1, -1.0 / self.grid.h))

    @property
    def n(self):
        return self.grid.n_interior

    @property
    def h(self):
        return self.grid.h

    def _check(self, *arrays):
        for a in arrays:
            if np.shape(a)[-1] != self.n:
                raise ValueError(
                    f"field of length {np.shape(a)[-1]} on a grid with {self.n} nodes")

    def stiffness_apply(self, v):
        """``A v`` along the last axis."""
        v = np.asarray(v, dtype=float)
        self._check(v)
        out = 2.0 * v
        out[..., 1:] -= v[..., :-1]
        out[..., :-1] -= v[..., 1:]
        return out / self.h

    def laplacian(self, v):
        """Central-difference Laplacian with zero boundary values, ``-M^{-1} A v``."""
        return -self.stiffness_apply(v) / self.h

    def stiffness_dense(self):
        n = self.n
        return (2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / self.h

    def inner_v(self, a, b):
        self._check(a, b)
        return np.sum(np.asarray(a) * self.stiffness_apply(b), axis=-1)

    def inner_h(self, a, b):
        self._check(a, b)
        return self.h * np.sum(np.asarray(a) * np.asarray(b), axis=-1)

    def solve_stiffness(self, rhs):
        """``A^{-1} rhs`` along the last axis."""
        rhs = np.asarray(rhs, dtype=float)
        self._check(rhs)
        diag = np.full(self.n, 2.0 / self.h)
        if rhs.ndim == 1:
            return solve_tridiag(self._off, diag, self._off, rhs)
        flat = rhs.reshape(-1, self.n)
        x = solve_tridiag(self._off, diag, self._off, flat.T)
        return np.asarray(x).T.reshape(rhs.shape)

    def riesz_lift(self, f):
        """Map a dual field (H-representative) to its V-representative."""
        f = np.asarray(f, dtype=float)
        if not np.all(np.isfinite(f)):
            raise ValueError("non-finite dual field")
        return self.solve_stiffness(self.h * f)

    def inner_vstar(self, f, g):
        return self.inner_v(self.riesz_lift(f), self.riesz_lift(g))

    def norm_vstar(self, f):
        f = np.asarray(f, dtype=float)
        return np.sqrt(np.maximum(self.h * np.sum(f * self.riesz_lift(f), axis=-1), 0.0))

    def norm_v(self, v):
        return np.sqrt(np.maximum(self.inner_v(v, v), 0.0))

    def norm_h(self, v):
        return np.sqrt(np.maximum(self.inner_h(v, v), 0.0))
