"""Acceptance criteria, one test and one printed PASS/FAIL line each.

Full-size runs (99 interior nodes, 101 time steps, 5 subintervals, cubic
reaction, 5% noise) are cached per session and shared between criteria.
"""

import numpy as np
import pytest

from landweber_kaczmarz import config as cfgmod
from landweber_kaczmarz.aao import AllAtOnceOperator
from landweber_kaczmarz.diagnostics import adjoint_mismatch, tcc_estimate
from landweber_kaczmarz.experiment import Experiment, iteration_config
from landweber_kaczmarz.model import Problem
from landweber_kaczmarz.solvers import solve_forward
from landweber_kaczmarz.verification import (_operator, adjoint_refinement, analytic_forward_error,
                                             self_convergence_order, taylor_slope, tcc_scaling, u_norm)

pytestmark = pytest.mark.slow

LINES = []
SEEDS_CONT = range(5)
SEEDS_TABLE = range(3)
NP_LIST = (3, 11, 21, 51, 101)
_RUNS = {}


def report(number, passed, text):
    line = f"{'PASS' if passed else 'FAIL'}  criterion {number}: {text}"
    LINES.append(line)
    print(line)
    return passed


def _run(setting, seed, obs="continuous", n_points=3, noise=0.05, theta0_truth=False):
    """Full-size run with loping and stopping bookkeeping checked on the fly."""
    key = (setting, seed, obs, n_points, noise, theta0_truth)
    if key in _RUNS:
        return _RUNS[key]
    cfg = cfgmod.load(overrides=[f"setting={setting}", f"seed={seed}", f"obs={obs}",
                                 f"n_points={n_points}", f"noise={noise}"])
    exp = Experiment.from_config(cfg)
    state = {"prev": None, "skips_identical": True, "skips": 0, "w_sum": 0}

    def hook(row, theta, u):
        prev = state["prev"]
        if prev is not None and row["w"] == 0:
            state["skips"] += 1
            same = np.array_equal(theta, prev[0]) and (u is None or np.array_equal(u, prev[1]))
            state["skips_identical"] &= bool(same)
        state["w_sum"] += row["w"]
        state["prev"] = (theta.copy(), None if u is None else u.copy())

    theta0 = exp.theta_true.copy() if theta0_truth else None
    res = exp.run(iteration_config(cfg), theta0=theta0, iterate_hook=hook)
    _RUNS[key] = (exp, res, state)
    return _RUNS[key]


def _stops_correctly(log):
    w, n = log.weights, log.n_equations
    if log.status != "converged" or len(w) < n:
        return False
    if not np.all(w[-n:] == 0):
        return False
    return len(w) == n or w[-n - 1] == 1


# 1 ------------------------------------------------------------------------

def test_criterion_1_adjoint_identity():
    parts, ok = [], True
    for setting in ("aao", "reduced"):
        mm = adjoint_refinement(setting)
        factor = float(np.min(mm[:-1] / mm[1:]))
        p = Problem.build(n_interior=5, n_steps=8, form="none")
        op, point = _operator(p, setting, adjoint="transpose")
        dense = max(adjoint_mismatch(op, point, 10, 0, mode="dense"), adjoint_mismatch(op, point, 10, 0))
        good = mm[0] <= 5e-2 and factor >= 1.8 and dense <= 1e-10
        ok &= good
        parts.append(f"{setting} mismatch {mm[0]:.2e} (<= 5e-2), refinement factor {factor:.2f} (>= 1.8), "
                     f"dense oracle {dense:.1e} (<= 1e-10)")
    assert report(1, ok, "; ".join(parts))


# 2 ------------------------------------------------------------------------

def test_criterion_2_taylor_slope():
    slopes = {s: taylor_slope(s) for s in ("aao", "reduced")}
    ok = all(1.9 <= v <= 2.1 for v in slopes.values())
    assert report(2, ok, ", ".join(f"{s} slope {v:.3f}" for s, v in slopes.items()) + " (in [1.9, 2.1])")


# 3 ------------------------------------------------------------------------

def test_criterion_3_forward_convergence():
    err = analytic_forward_error()
    order, _ = self_convergence_order()
    ok = err <= 2e-3 and 0.8 <= order <= 1.2
    assert report(3, ok, f"analytic max-node error {err:.2e} (<= 2e-3), order in dt {order:.3f} (in [0.8, 1.2])")


# 4 ------------------------------------------------------------------------

def test_criterion_4_experiment_reproduction():
    stats = {}
    for setting in ("reduced", "aao"):
        runs = [_run(setting, s)[1] for s in SEEDS_CONT]
        stats[setting] = {
            "err": float(np.median([r.log.final_rel_error for r in runs])),
            "k": float(np.median([r.log.n_loops for r in runs])),
            "per_iter": float(np.median([r.log.summary()["mean_iter_s"] for r in runs])),
            "status": {r.status for r in runs},
        }
    red, aao = stats["reduced"], stats["aao"]
    checks = {
        "reduced error in [0.07, 0.17]": 0.07 <= red["err"] <= 0.17,
        "aao error in [0.09, 0.22]": 0.09 <= aao["err"] <= 0.22,
        "reduced <= aao": red["err"] <= aao["err"],
        "aao stop >= 1.2x reduced": aao["k"] >= 1.2 * red["k"],
        "aao time/iter < reduced": aao["per_iter"] < red["per_iter"],
        "all converged": red["status"] == aao["status"] == {"converged"},
    }
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    text = (f"median over 5 seeds: reduced error {red['err']:.4f}, aao error {aao['err']:.4f}; "
            f"stopping index reduced {red['k']:.0f}, aao {aao['k']:.0f}; "
            f"time per iteration reduced {red['per_iter'] * 1e3:.2f} ms, aao {aao['per_iter'] * 1e3:.2f} ms")
    if failed:
        text += "; failed: " + ", ".join(failed)
    assert report(4, ok, text)


# 5 ------------------------------------------------------------------------

def test_criterion_5_observation_count_trend():
    med = {}
    for setting in ("reduced", "aao"):
        med[setting] = [float(np.median([_run(setting, s, "discrete", npts)[1].log.final_rel_error
                                         for s in SEEDS_TABLE])) for npts in NP_LIST]
    spread = {s: max(v) - min(v) for s, v in med.items()}
    ok = all(v <= 0.06 for v in spread.values())
    text = "; ".join(f"{s} errors " + " ".join(f"{e:.3f}" for e in med[s]) + f" spread {spread[s]:.3f}"
                     for s in med) + " (spread <= 0.06)"
    assert report(5, ok, text)


# 6 ------------------------------------------------------------------------

def test_criterion_6_stopping_rule():
    for setting in ("reduced", "aao"):
        _run(setting, 0)
    noisy = [v[1] for k, v in _RUNS.items() if k[4] > 0]
    converged = [r for r in noisy if r.status == "converged"]
    tails_ok = all(_stops_correctly(r.log) for r in converged)
    truth = {s: _run(s, 0, noise=0.0, theta0_truth=True)[1] for s in ("reduced", "aao")}
    truth_ok = all(r.status == "converged" and r.log.n_loops <= r.log.n_equations and r.log.n_updates == 0
                   for r in truth.values())
    ok = tails_ok and truth_ok and len(converged) == len(noisy)
    text = (f"{len(converged)}/{len(noisy)} noisy runs converged, all end in n zeros after a 1: {tails_ok}; "
            "truth start on exact data: " +
            ", ".join(f"{s} {r.log.n_loops} loops {r.log.n_updates} updates" for s, r in truth.items()))
    assert report(6, ok, text)


# 7 ------------------------------------------------------------------------

def test_criterion_7_loping():
    for setting in ("reduced", "aao"):
        _run(setting, 0)
    runs = list(_RUNS.values())
    identical = all(st["skips_identical"] for _, _, st in runs)
    sums = all(st["w_sum"] == res.log.n_updates == res.log.summary()["updates"] for _, res, st in runs)
    skips = sum(st["skips"] for _, _, st in runs)
    ok = identical and sums
    assert report(7, ok, f"{len(runs)} runs, {skips} skipped iterations all bit-identical: {identical}; "
                         f"sum of weights equals updates column: {sums}")


# 8 ------------------------------------------------------------------------

def test_criterion_8_tangential_cone():
    med = {s: tcc_scaling(s) for s in ("aao", "reduced")}
    mono = {s: bool(np.all(np.diff(v) < 0)) for s, v in med.items()}
    p = Problem.build()
    exp = _run("reduced", 0)[0]
    theta = exp.theta_true
    # neighborhood radius: distance of the zero start from the truth
    r_red = float(np.sqrt(p.ops.inner_h(theta, theta)))
    u_true = solve_forward(theta, p)
    r_aao = u_norm(u_true, p)
    est_red = tcc_estimate(p, "reduced", theta, r_red, samples=20, seed=0)
    est_aao = tcc_estimate(p, "aao", u_true, r_aao, samples=20, seed=0)
    ok = all(mono.values())
    text = ("radius scaling medians " +
            "; ".join(f"{s} " + " ".join(f"{v:.3g}" for v in med[s]) + f" monotone {mono[s]}" for s in med) +
            f". Reported at the start-to-truth radius (20 samples, seed 0): reduced {est_red.max_ratio:.3f} "
            f"at X-radius {r_red:.2f} ({'<' if est_red.max_ratio < 0.5 else '>='} 0.5), aao "
            f"{est_aao.max_ratio:.3f} at U-radius {r_aao:.2f} ({'<' if est_aao.max_ratio < 0.5 else '>='} 0.5)")
    assert report(8, ok, text)
