import numpy as np
import pytest

from landweber_kaczmarz.experiment import truth_profile
from landweber_kaczmarz.model import Problem
from landweber_kaczmarz.solvers import (NewtonConfig, SolverError, solve_adjoint_backward,
                                        solve_forward, solve_sensitivity)
from landweber_kaczmarz.verification import analytic_forward_error, self_convergence_order


def test_zero_source_zero_state(desk):
    u = solve_forward(np.zeros(desk.n), desk)
    assert u.shape == (22, 9) and np.all(u == 0)


def test_linear_analytic_solution():
    assert analytic_forward_error() <= 2e-3


@pytest.mark.parametrize("gamma", [1.0, 3.0])
def test_first_order_in_time(gamma):
    order, errs = self_convergence_order(gamma=gamma)
    assert np.all(np.diff(errs) < 0)
    assert 0.8 <= order <= 1.2


def test_newton_residual_small(desk, desk_theta):
    u = solve_forward(desk_theta, desk)
    dt = desk.time.dt
    from landweber_kaczmarz.model import f_eval
    for k in range(1, desk.time.n_steps + 1):
        r = (u[k] - u[k - 1]) / dt - f_eval(u[k], desk_theta, desk)
        assert np.max(np.abs(r)) <= 1e-9 * (1 + np.max(np.abs(u[k - 1] / dt + desk_theta)))


def test_forward_rejects_nonfinite(desk):
    with pytest.raises(ValueError):
        solve_forward(np.full(desk.n, np.nan), desk)
    with pytest.raises(ValueError):
        solve_forward(np.zeros(desk.n + 1), desk)


def test_solver_failure_carries_step():
    p = Problem.build(n_interior=5, n_steps=2, T=10.0, n_sub=1, gamma=3.0)
    with pytest.raises(SolverError) as info:
        solve_forward(np.full(5, 1e8), p, NewtonConfig(max_iter=1))
    assert info.value.step == 1


def test_newton_config_validation():
    with pytest.raises(ValueError):
        NewtonConfig(tol=0)
    with pytest.raises(ValueError):
        NewtonConfig(max_iter=0)


def test_sensitivity_zero_and_linear_exact(rng):
    p = Problem.build(n_interior=19, n_steps=30, form="none")
    th = rng.standard_normal(19)
    ub = solve_forward(th, p)
    assert np.all(solve_sensitivity(th, ub, np.zeros(19), p) == 0)
    xi = np.sin(np.pi * p.space.x)
    v = solve_sensitivity(th, ub, xi, p)
    np.testing.assert_allclose(v, solve_forward(th + xi, p) - ub, atol=1e-12)


def test_sensitivity_finite_difference(desk, desk_theta, rng):
    ub = solve_forward(desk_theta, desk)
    xi = rng.standard_normal(desk.n)
    v = solve_sensitivity(desk_theta, ub, xi, desk)
    errs = [np.max(np.abs((solve_forward(desk_theta + e * xi, desk) - ub) / e - v)) for e in (1e-2, 1e-3)]
    assert errs[1] < errs[0] / 8


def test_sensitivity_linear_in_direction(desk, desk_theta, rng):
    ub = solve_forward(desk_theta, desk)
    a, b, ia, ib = rng.standard_normal((4, desk.n))
    lhs = solve_sensitivity(desk_theta, ub, 2 * a - b, desk, 2 * ia - ib)
    rhs = 2 * solve_sensitivity(desk_theta, ub, a, desk, ia) - solve_sensitivity(desk_theta, ub, b, desk, ib)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_adjoint_zero_source(desk, desk_theta):
    ub = solve_forward(desk_theta, desk)
    assert np.all(solve_adjoint_backward(desk_theta, ub, None, desk) == 0)


def test_adjoint_time_reversal(rng):
    # linear case: a constant-in-time source run backwards equals the forward solve
    p = Problem.build(n_interior=15, n_steps=20, form="none")
    s = rng.standard_normal(15)
    ub = np.zeros((21, 15))
    q = solve_adjoint_backward(np.zeros(15), ub, np.tile(s, (21, 1)), p)
    fwd = solve_forward(s, p)
    np.testing.assert_allclose(q[::-1], fwd, atol=1e-12)


def test_adjoint_jumps_are_left_limits(desk, desk_theta, rng):
    ub = solve_forward(desk_theta, desk)
    J = rng.standard_normal(desk.n)
    q = solve_adjoint_backward(desk_theta, ub, None, desk, jumps={desk.time.n_steps: J})
    np.testing.assert_array_equal(q[-1], J)
    q2 = solve_adjoint_backward(desk_theta, ub, None, desk, jumps={10: J})
    assert np.all(q2[11:] == 0)
    np.testing.assert_array_equal(q2[10], J)


def test_adjoint_shape_check(desk, desk_theta):
    ub = solve_forward(desk_theta, desk)
    with pytest.raises(ValueError):
        solve_adjoint_backward(desk_theta, ub, np.zeros((3, desk.n)), desk)


def test_energy_stability(rng):
    p = Problem.build(n_interior=29, n_steps=40, form="none")
    th = rng.standard_normal(29)
    u = solve_forward(th, p)
    nh = p.ops.norm_h
    for k in range(40):
        assert nh(u[k + 1]) <= nh(u[k]) + p.time.dt * nh(th) + 1e-14


def test_tent_truth_state_is_moderate():
    p = Problem.build()
    u = solve_forward(truth_profile(p.space.x), p)
    assert 0.9 < np.max(u) < 1.2
