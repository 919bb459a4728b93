import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import mv_moments_ode

from setvalued import ScalarizationBlowup, mean_variance_oracle
from setvalued.mean_variance import (
    MVParams,
    closed_form_gap,
    mc_objective,
    moving_scalarization,
    objective_at,
    optimal_control,
    optimal_moments,
    simulate_optimal,
    static_solution,
    support_function_defect,
    time_consistency_check,
    value_process,
)
from setvalued.reference_sets import MeanVarianceSet
from setvalued.rng import BLOCK

E = np.e
# closed forms at x0 = 0, λ = 1, T = 1
STATIC_V0 = (E - 1) / 2
STATIC_Y1 = E - 1
STATIC_Y2 = (E - 1) ** 2 + (E - 1)
# frozen: Λ at t = 1/2 with X - x0 = 1 is e^{1/2} / (e - 1)
LAMBDA_HALF = 0.959517375667472
# frozen: E X - ½ Var X of the optimal state at T - 1e-3 (cross-checked by the moment ODE below)
OBJECTIVE_NEAR_T = 0.8577815940185478

params_strategy = st.builds(MVParams, x0=st.floats(-2, 2), lam=st.floats(0.2, 5), T=st.floats(0.2, 3))


def test_static_solution_frozen():
    s = static_solution(MVParams())
    assert s.V0 == pytest.approx(STATIC_V0, abs=1e-12)
    assert s.y1 == pytest.approx(STATIC_Y1, abs=1e-12)
    assert s.y2 == pytest.approx(STATIC_Y2, abs=1e-12)


@given(params_strategy)
def test_static_solution_maximizes_scalarized_objective_on_boundary(p):
    """Brute force over the raw boundary y2 = e^{-T} x0² + (y1 - x0 e^{-T})² / (1 - e^{-T})."""
    q = np.exp(-p.T)
    y1 = np.linspace(p.x0 - 5 - 5 / p.lam * p.eT, p.x0 + 5 + 5 / p.lam * p.eT, 400_001)
    y2 = q * p.x0**2 + (y1 - p.x0 * q) ** 2 / (1 - q)
    phi = y1 + 0.5 * p.lam * y1**2 - 0.5 * p.lam * y2
    s = static_solution(p)
    assert s.V0 == pytest.approx(phi.max(), abs=1e-6 * (1 + abs(s.V0)))
    assert s.y1 == pytest.approx(y1[np.argmax(phi)], abs=1e-3 * (1 + abs(s.y1)))


def test_moving_scalarization_frozen():
    p = MVParams()
    assert float(moving_scalarization(p, 0.5, 1.0)) == pytest.approx(LAMBDA_HALF, abs=1e-14)
    assert float(moving_scalarization(p, 0.0, 0.0)) == pytest.approx(1.0, abs=1e-15)


def test_scalarization_blows_up_at_admissibility_edge():
    p = MVParams()
    with pytest.raises(ScalarizationBlowup):
        moving_scalarization(p, 0.2, p.eT)


@given(params_strategy, st.floats(0, 0.9), st.floats(-1, 1))
def test_scalarization_equals_two_over_phi2(p, frac, dx):
    t = frac * p.T
    x = p.x0 + dx * 0.5 * p.eT / p.lam
    gap = closed_form_gap(p, t, x)
    phi1 = MeanVarianceSet(p.T).phi1(t)
    assert float(moving_scalarization(p, t, x)) == pytest.approx(2 / (2 * phi1 * gap), rel=1e-10)
    # the optimal feedback is (1 + φ₁) times the gap
    assert float(optimal_control(p, t, x)) == pytest.approx(float((1 + phi1) * gap), rel=1e-10, abs=1e-12)


@given(params_strategy, st.floats(-1, 1))
def test_value_process_terminal_and_initial_values(p, x):
    assert float(value_process(p, p.T, x)) == pytest.approx(x, abs=1e-12)
    assert float(value_process(p, 0.0, p.x0)) == pytest.approx(static_solution(p).V0, abs=1e-12)
    assert float(closed_form_gap(p, p.T, x)) == pytest.approx(0.0, abs=1e-12)


def test_objective_near_horizon_frozen_and_ode_oracle():
    p = MVParams()
    assert objective_at(p, 1 - 1e-3) == pytest.approx(OBJECTIVE_NEAR_T, abs=1e-13)
    mean, var = mv_moments_ode(1.0, 1.0, 0.0, 1 - 1e-3)
    assert mean - 0.5 * var == pytest.approx(OBJECTIVE_NEAR_T, abs=1e-9)


@given(params_strategy, st.floats(0.05, 0.95))
def test_optimal_moments_match_moment_ode(p, frac):
    t = frac * p.T
    mean, var = optimal_moments(p, t)
    m_ode, v_ode = mv_moments_ode(p.T, p.lam, p.x0, t)
    scale = 1 + p.eT / p.lam
    assert float(mean) == pytest.approx(m_ode, abs=1e-8 * scale)
    assert float(var) == pytest.approx(v_ode, abs=1e-8 * scale**2)


def test_objective_tends_to_static_value():
    p = MVParams(x0=0.3, lam=2.0, T=1.5)
    assert objective_at(p, p.T) == pytest.approx(static_solution(p).V0, abs=1e-12)


def test_monte_carlo_objective_within_three_standard_errors():
    sim = simulate_optimal(MVParams(), 1e-3, 20_000, seed=3)
    s = sim.summary
    assert abs(s["z_score"]) <= 3
    assert s["positivity_violations"] == 0 and s["admissibility_violations"] == 0
    assert s["V0"] == pytest.approx(STATIC_V0, abs=1e-12)


def test_mc_objective_on_known_sample():
    X = np.array([0.0, 1.0, 2.0, 3.0])
    out = mc_objective(MVParams(), X, 0.5)
    var = np.var(X, ddof=1)
    assert out["mc_objective"] == pytest.approx(1.5 - 0.5 * var)
    assert out["mc_variance"] == pytest.approx(var)


def test_simulation_independent_of_workers():
    p = MVParams()
    a = simulate_optimal(p, 1e-2, BLOCK + 700, seed=11, workers=1)
    b = simulate_optimal(p, 1e-2, BLOCK + 700, seed=11, workers=2)
    np.testing.assert_array_equal(a.terminal_X, b.terminal_X)
    np.testing.assert_array_equal(a.path_defects, b.path_defects)
    assert json.dumps(a.summary, sort_keys=True) == json.dumps(b.summary, sort_keys=True)


def test_adding_paths_keeps_existing_paths():
    p = MVParams()
    a = simulate_optimal(p, 1e-2, 100, seed=4)
    b = simulate_optimal(p, 1e-2, 300, seed=4)
    np.testing.assert_array_equal(a.terminal_X, b.terminal_X[:100])


def test_step_count_never_passes_horizon_guard():
    sim = simulate_optimal(MVParams(), 4e-4, 10, seed=0)
    assert sim.times[-1] <= 1 - 1e-3 + 1e-12
    assert sim.summary["steps"] == 2497


def test_zero_noise_keeps_backward_component_constant():
    sim = simulate_optimal(MVParams(), 1e-3, 5, seed=0, zero_noise=True)
    u = sim.paths[0].upsilon1
    np.testing.assert_allclose(u, u[0], atol=1e-12)


def test_closed_form_defect_is_first_order():
    p = MVParams()
    stats = {}
    for dt in (2e-3, 1e-3):
        sim = simulate_optimal(p, dt, 2000, seed=5)
        stats[dt] = (np.median(sim.path_defects) / dt, np.quantile(sim.path_defects, 0.99) / dt)
    for median, q99 in stats.values():
        assert median < 1.0
        assert q99 <= 5.0
    assert stats[1e-3][0] == pytest.approx(stats[2e-3][0], rel=0.1)


def test_recorded_paths_carry_consistent_scalarization():
    p = MVParams()
    sim = simulate_optimal(p, 1e-3, 50, seed=2, record=3)
    assert len(sim.paths) == 3
    path = sim.paths[1]
    np.testing.assert_allclose(path.Lambda, moving_scalarization(p, path.times, path.X))
    assert path.rows().shape == (len(path.times), 5)


def test_alignment_with_set_normal_along_path():
    p = MVParams()
    path = simulate_optimal(p, 1e-3, 5, seed=6).paths[0]
    idx = np.linspace(0, len(path.times) - 1, 100).astype(int)
    assert np.max(time_consistency_check(p, path.times[idx], path.X[idx])) <= 1e-6


def test_alignment_detects_wrong_point():
    p = MVParams()
    y = np.array([[1.0, float(MeanVarianceSet(1.0).boundary_y2(0.3, 0.0, 1.0))]])
    assert time_consistency_check(p, 0.3, 0.0, y)[0] > 1e-2


def test_support_function_defect_small():
    assert support_function_defect(MVParams(), 0.4, 0.2) <= 1e-6


def test_oracle_normal_agrees_with_scalarization_direction():
    p = MVParams()
    t, x = 0.3, 0.1
    gap = float(closed_form_gap(p, t, x))
    y = [x + gap, float(MeanVarianceSet(1.0).phi1(t)) * gap**2]
    n = mean_variance_oracle(1.0).grad_y(t, [x], y)[0]
    lam = float(moving_scalarization(p, t, x))
    d = np.array([1.0, -lam / 2]) / np.hypot(1.0, lam / 2)
    assert abs(abs(n @ d) - 1) < 1e-12


def test_parameter_validation():
    with pytest.raises(ValueError):
        MVParams(lam=0.0)
    with pytest.raises(ValueError):
        MVParams(T=-1.0)
    with pytest.raises(ValueError):
        simulate_optimal(MVParams(), 2.0, 10, 0)
