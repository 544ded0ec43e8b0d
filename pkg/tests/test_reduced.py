import numpy as np
import pytest

from landweber_kaczmarz.diagnostics import adjoint_mismatch, smooth_field
from landweber_kaczmarz.model import ObservationOperator, Problem
from landweber_kaczmarz.noise import observe
from landweber_kaczmarz.reduced import ReducedOperator
from landweber_kaczmarz.solvers import solve_forward
from landweber_kaczmarz.verification import adjoint_refinement, taylor_slope


def test_truth_residual_exactly_zero(desk, desk_theta):
    op = ReducedOperator(desk)
    y = observe(desk, solve_forward(desk_theta, desk))
    for j in range(op.n_equations):
        assert op.norm(op.residual(desk_theta, y, j), j) == 0


def test_zero_residual(desk):
    op = ReducedOperator(desk)
    y = np.zeros((22, 9))
    assert np.all(op.residual(np.zeros(9), y, 0) == 0)


def test_only_active_slots_read(desk, desk_theta):
    op = ReducedOperator(desk)
    y = observe(desk, solve_forward(desk_theta, desk))
    op.residual(desk_theta, y, 2)
    b = desk.time.bounds
    touched = np.flatnonzero(op.read_slots)
    assert touched.min() >= b[2] and touched.max() <= b[3]
    poisoned = y.copy()
    outside = np.setdiff1d(np.arange(22), touched)
    poisoned[outside] = np.nan
    assert np.all(np.isfinite(op.residual(desk_theta, poisoned, 2)))


def test_state_cache_tokens(desk, desk_theta):
    op = ReducedOperator(desk)
    op.state(desk_theta)
    token = op.cache.token
    op.deriv(desk_theta, np.ones(9), 0)
    op.adjoint(desk_theta, np.ones((22, 9)), 0)
    assert op.cache.token == token and op.cache.n_solves == 1
    op.state(desk_theta + 1e-9)
    assert op.cache.token != token and op.cache.n_solves == 2


def test_deriv_zero_and_superposition(desk, desk_theta, rng):
    op = ReducedOperator(desk)
    assert np.all(op.deriv(desk_theta, np.zeros(9), 1) == 0)
    a, b = rng.standard_normal((2, 9))
    np.testing.assert_allclose(op.deriv(desk_theta, 2 * a - 3 * b, 1),
                               2 * op.deriv(desk_theta, a, 1) - 3 * op.deriv(desk_theta, b, 1), atol=1e-12)


def test_linear_deriv_exact(rng):
    p = Problem.build(n_interior=9, n_steps=21, form="none")
    op = ReducedOperator(p, "full")
    th, xi = rng.standard_normal((2, 9))
    np.testing.assert_allclose(op.forward(th + xi) - op.forward(th), op.deriv(th, xi, 0), atol=1e-12)


def test_taylor_slope_two():
    assert 1.9 <= taylor_slope("reduced") <= 2.1


def test_zero_adjoint(desk, desk_theta):
    op = ReducedOperator(desk)
    assert np.all(op.adjoint(desk_theta, np.zeros((22, 9)), 0) == 0)


def test_adjoint_refinement_first_order():
    mm = adjoint_refinement("reduced")
    assert mm[0] <= 5e-2
    assert np.all(mm[:-1] / mm[1:] >= 1.8)


@pytest.mark.parametrize("scheme", ["standard", "init_in_all", "growing", "full"])
def test_adjoint_all_schemes_small(desk, desk_theta, scheme):
    assert adjoint_mismatch(ReducedOperator(desk, scheme), desk_theta, trials=6) <= 5e-2


@pytest.mark.parametrize("obs", [None, ObservationOperator.uniform_times(4, 8),
                                 ObservationOperator.subdomain([1, 2])])
def test_transpose_dense_oracle(obs, rng):
    p = Problem.build(n_interior=5, n_steps=8, n_sub=2, form="none", obs=obs)
    op = ReducedOperator(p, "standard", "transpose")
    th = rng.standard_normal(5)
    assert adjoint_mismatch(op, th, 8, mode="dense") <= 1e-10
    assert adjoint_mismatch(op, th, 8) <= 1e-10


def test_transpose_exact_nonlinear(desk, desk_theta):
    op = ReducedOperator(desk, "standard", "transpose")
    assert adjoint_mismatch(op, desk_theta, 10) <= 1e-12


def test_formula_constant_field_full_range(rng):
    # linear model, full range: formula adjoint approaches the dense transpose
    p = Problem.build(n_interior=5, n_steps=8, n_sub=1, form="none")
    th = rng.standard_normal(5)
    z = np.tile(rng.standard_normal(5), (9, 1))
    exact = ReducedOperator(p, "full", "transpose").adjoint(th, z, 0)
    approx = ReducedOperator(p, "full", "formula").adjoint(th, z, 0)
    assert np.linalg.norm(approx - exact) <= 0.1 * np.linalg.norm(exact)


def test_discrete_formula_adjoint_first_order():
    # jumps enter without the smoothing backward solve the transpose applies: O(dt) gap
    mm = []
    for k in range(3):
        n, N = 10 * 2 ** k - 1, 20 * 2 ** k
        p = Problem.build(n_interior=n, n_steps=N, obs=ObservationOperator.uniform_times(5, N))
        th = 20.0 * 2.0 * np.minimum(p.space.x, 1 - p.space.x)
        mm.append(adjoint_mismatch(ReducedOperator(p), th, trials=10))
    mm = np.array(mm)
    assert mm[0] <= 0.15
    assert np.all(mm[:-1] / mm[1:] >= 1.8)


def test_adjoint_state_jumps_weighted(rng):
    p = Problem.build(n_interior=9, n_steps=20, obs=ObservationOperator.uniform_times(4, 20))
    op = ReducedOperator(p)
    z = rng.standard_normal((4, 9))
    _, jumps = op.adjoint_state(np.zeros(9), z, 2)
    assert list(jumps) == [15]
    np.testing.assert_allclose(jumps[15], p.point_weights[2] * z[2])


def test_unknown_adjoint_mode(desk):
    with pytest.raises(ValueError):
        ReducedOperator(desk, adjoint="guess")


def test_reduced_state_matches_solver(desk, rng):
    th = smooth_field(rng, desk.space.x)
    np.testing.assert_array_equal(ReducedOperator(desk).state(th), solve_forward(th, desk))
