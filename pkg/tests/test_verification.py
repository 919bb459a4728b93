import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import heat_interval_ends

from setvalued import (
    CFLViolation,
    GridTooCoarse,
    ball_oracle,
    feedback_from_hamiltonian,
    mean_variance_oracle,
    scalar_hjb_solve,
    verification_sde_simulate,
)
from setvalued.mean_variance import MVParams, closed_form_gap, static_solution
from setvalued.problems import heat_ball_problem, mean_variance_problem, scalar_interval_problem
from setvalued.reference_sets import MeanVarianceSet

T = 1.0
PROBLEM, BALL = heat_ball_problem(T, (0.05, 0.05), resolution=24)
ORACLE = ball_oracle(BALL, epsilon_band=0.4)
Y0 = BALL.w(np.zeros(1), np.zeros((1, 1)))[0] + BALL.u(np.zeros(1), np.zeros((1, 1)))[0] * np.array(
    [np.cos(0.7), np.sin(0.7)]
)


def heat_point(t, x, theta):
    tt, xx = np.array([t]), np.array([[x]])
    return BALL.w(tt, xx)[0] + BALL.u(tt, xx)[0] * np.array([np.cos(theta), np.sin(theta)])


@given(t=st.floats(0, 0.8), x=st.floats(-1, 1), theta=st.floats(0, 2 * np.pi))
def test_drift_defect_has_no_normal_part_on_solutions(t, x, theta):
    fb = feedback_from_hamiltonian(PROBLEM, ORACLE)
    y = heat_point(t, x, theta)
    full = fb.I3_full(t, [x], y)[0]
    n = ORACLE.grad_y(t, [x], y)[0]
    assert abs(full @ n) <= 1e-12
    np.testing.assert_allclose(fb.I3(t, [x], y)[0] @ n, 0.0, atol=1e-14)


def test_closed_form_and_numerical_feedback_agree():
    closed = feedback_from_hamiltonian(PROBLEM, ORACLE)
    numeric = feedback_from_hamiltonian(PROBLEM, ORACLE, use_closed_form=False)
    assert closed.source == "closed_form_tag" and numeric.source == "hamiltonian_argmax"
    y = heat_point(0.2, 0.3, 2.0)
    np.testing.assert_allclose(numeric.I1(0.2, [0.3], y), closed.I1(0.2, [0.3], y), atol=1e-4)
    np.testing.assert_allclose(numeric.I2(0.2, [0.3], y), closed.I2(0.2, [0.3], y), atol=1e-9)


def test_verification_flow_tracks_heat_ball_boundary():
    times = np.linspace(0.0, 0.3, 151)
    run = verification_sde_simulate(PROBLEM, ORACLE, None, [0.0], Y0, times, 60, seed=5, compare_forms=True)
    assert run.max_abs_residual < 0.02
    assert run.max_form_gap <= 1e-10


def test_verification_forms_produce_same_paths():
    times = np.linspace(0.0, 0.2, 51)
    a = verification_sde_simulate(PROBLEM, ORACLE, None, [0.0], Y0, times, 10, seed=1, form="X*2")
    b = verification_sde_simulate(PROBLEM, ORACLE, None, [0.0], Y0, times, 10, seed=1, form="X*")
    np.testing.assert_allclose(a.Y, b.Y, atol=1e-12)


def test_verification_is_independent_of_workers():
    times = np.linspace(0.0, 0.1, 26)
    a = verification_sde_simulate(PROBLEM, ORACLE, None, [0.0], Y0, times, 30, seed=2)
    b = verification_sde_simulate(PROBLEM, ORACLE, None, [0.0], Y0, times, 30, seed=2, workers=3, batch=4)
    np.testing.assert_array_equal(a.Y, b.Y)
    assert json.dumps(a.summary, sort_keys=True) == json.dumps(b.summary, sort_keys=True)


def test_numerical_feedback_reproduces_closed_form_paths():
    times = np.linspace(0.0, 0.05, 6)
    fb = feedback_from_hamiltonian(PROBLEM, ORACLE, use_closed_form=False)
    a = verification_sde_simulate(PROBLEM, ORACLE, None, [0.0], Y0, times, 2, seed=3)
    b = verification_sde_simulate(PROBLEM, ORACLE, fb, [0.0], Y0, times, 2, seed=3)
    np.testing.assert_allclose(a.Y, b.Y, atol=1e-5)


def test_zero_noise_flow_ignores_seed_and_drifts_by_ito_correction():
    """Without noise nothing balances the second-order terms, so Υ leaves the boundary slowly."""
    times = np.linspace(0.0, 0.3, 301)
    a = verification_sde_simulate(PROBLEM, ORACLE, None, [0.0], Y0, times, 1, seed=0, zero_noise=True)
    b = verification_sde_simulate(PROBLEM, ORACLE, None, [0.0], Y0, times, 1, seed=9, zero_noise=True)
    np.testing.assert_array_equal(a.Y, b.Y)
    np.testing.assert_array_equal(a.X, 0.0)
    assert 1e-4 < a.max_abs_residual < 0.05


def test_mean_variance_verification_follows_closed_form_gap():
    params = MVParams()
    y1 = static_solution(params).y1
    y0 = [y1, float(MeanVarianceSet(T).boundary_y2(0.0, 0.0, y1))]
    times = np.linspace(0.0, 0.5, 251)
    run = verification_sde_simulate(mean_variance_problem(T), mean_variance_oracle(T), None, [0.0], y0, times, 40,
                                    seed=8, guard=1e4, compare_forms=True)
    X, U = run.X[:, :, 0], run.Y[:, :, 0]
    err = np.abs(U - X - closed_form_gap(params, run.times[:, None], X)).max(axis=0)
    assert np.median(err) < 2e-2
    assert run.max_form_gap <= 1e-10


def test_unknown_form_is_rejected():
    with pytest.raises(ValueError):
        verification_sde_simulate(PROBLEM, ORACLE, None, [0.0], Y0, [0.0, 0.1], 1, 0, form="X")


def scalar_error(sol, window=np.pi):
    tau_t = sol.times[:, None]
    lo, hi = heat_interval_ends(T, tau_t, sol.x[None, :])
    inner = np.abs(sol.x) <= window
    return max(np.max(np.abs(sol.lower - lo)[:, inner]), np.max(np.abs(sol.upper - hi)[:, inner]))


def test_scalar_solver_reproduces_closed_form_interval():
    problem = scalar_interval_problem(resolution=2)
    fine = scalar_hjb_solve(problem, -2 * np.pi, 2 * np.pi, 0.05, T)
    coarse = scalar_hjb_solve(problem, -2 * np.pi, 2 * np.pi, 0.1, T)
    e_fine, e_coarse = scalar_error(fine), scalar_error(coarse)
    assert e_fine < 2e-3
    assert e_coarse / e_fine > 2
    assert not fine.degenerate


def test_scalar_solution_interpolates_as_interval():
    sol = scalar_hjb_solve(scalar_interval_problem(resolution=2), -2 * np.pi, 2 * np.pi, 0.05, T)
    iv = sol.interval()
    lo, hi = heat_interval_ends(T, 0.5, 0.3)
    assert iv.lower(np.array([0.5]), np.array([[0.3]]))[0] == pytest.approx(lo, abs=2e-3)
    assert iv.upper(np.array([0.5]), np.array([[0.3]]))[0] == pytest.approx(hi, abs=2e-3)


def test_scalar_solver_guards():
    problem = scalar_interval_problem(resolution=2)
    with pytest.raises(CFLViolation):
        scalar_hjb_solve(problem, -1, 1, 0.1, T, dt=0.1)
    with pytest.raises(GridTooCoarse):
        scalar_hjb_solve(problem, -1, 1, 0.5, T)
    with pytest.raises(ValueError):
        scalar_hjb_solve(heat_ball_problem()[0], -1, 1, 0.1, T)
