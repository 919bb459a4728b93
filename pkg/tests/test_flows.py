import numpy as np
import pytest

from setvalued import (
    CompetitorOffBoundary,
    DiffusionSpec,
    LeftTube,
    TangentFieldSpec,
    ball_oracle,
    geodesic_length,
    geodesic_ode,
    ito_flow_simulate,
    length_comparison,
    mean_variance_oracle,
    surjectivity_check,
)
from setvalued.experiments import heat_ball_flow
from setvalued.flows import curve_length, flow_coefficients
from setvalued.reference_sets import MeanVarianceSet, static_ball, translating_ball


def test_geodesic_on_translating_ball_is_a_translation():
    oracle = ball_oracle(translating_ball())
    traj = geodesic_ode(oracle, 0.0, [1.0, 0.0], 1.0, 1e-3)
    np.testing.assert_allclose(traj.ys, np.column_stack([1 + traj.xs, np.zeros_like(traj.xs)]), atol=1e-12)
    assert np.max(np.abs(traj.residuals)) < 1e-12
    assert geodesic_length(traj) == pytest.approx(1.0, abs=1e-12)


def test_geodesic_on_translating_ball_from_tilted_point():
    """Boundary velocity is n₁ n while the centre moves along e₁, so the polar angle obeys θ' = sin θ."""
    oracle = ball_oracle(translating_ball())
    a0 = 0.8
    traj = geodesic_ode(oracle, 0.0, [np.cos(a0), np.sin(a0)], 0.5, 1e-3)
    assert np.max(np.abs(traj.residuals)) < 1e-9
    theta = 2 * np.arctan(np.tan(a0 / 2) * np.exp(traj.xs))
    q = traj.ys - np.column_stack([traj.xs, np.zeros_like(traj.xs)])
    np.testing.assert_allclose(np.arctan2(q[:, 1], q[:, 0]), theta, atol=1e-10)


def test_geodesic_stays_on_mean_variance_boundary():
    oracle = mean_variance_oracle(1.0)
    mv = MeanVarianceSet(1.0)
    y0 = np.array([0.5, float(mv.boundary_y2(0.0, 0.0, 0.5))])
    traj = geodesic_ode(oracle, 0.0, y0, 1.0, 1e-3)
    assert np.max(np.abs(traj.residuals)) < 1e-7


def test_geodesic_rejects_vector_states():
    with pytest.raises(ValueError):
        geodesic_ode(ball_oracle(static_ball([0.0, 0.0], 1.0, d=2)), 0.0, [1.0, 0.0], 1.0, 0.1)


def test_length_comparison_against_tangential_bump():
    oracle = ball_oracle(translating_ball())
    dx = 1e-2

    def competitor(xs):
        s = xs / dx
        ang = 0.5 * dx * dx * s * (1 - s)
        return np.column_stack([xs + np.cos(ang), np.sin(ang)])

    margin = length_comparison(oracle, 0.0, [1.0, 0.0], competitor, dx)
    assert margin <= 1e-3
    assert margin <= 0.0


def test_length_comparison_rejects_off_boundary_competitor():
    oracle = ball_oracle(translating_ball())
    with pytest.raises(CompetitorOffBoundary):
        length_comparison(oracle, 0.0, [1.0, 0.0], lambda xs: np.column_stack([1 + 2 * xs, 0 * xs]), 0.1)


def test_curve_length_of_polyline():
    assert curve_length(np.array([[0, 0], [3, 4], [3, 5]])) == pytest.approx(6.0)


def test_static_ball_flow_without_fields_is_stationary():
    oracle = ball_oracle(static_ball([0.0, 0.0], 1.0))
    y0 = [[np.cos(0.7), np.sin(0.7)]]
    res = ito_flow_simulate(oracle, DiffusionSpec.brownian(1), TangentFieldSpec(), y0, np.linspace(0, 0.2, 21), 5, 0)
    np.testing.assert_allclose(res.Y[-1, :, 0], np.broadcast_to(y0[0], (5, 2)), atol=1e-14)


def test_heat_ball_flow_keeps_points_near_boundary():
    oracle, diffusion, fields, y0 = heat_ball_flow()
    times = np.linspace(0.0, 0.2, 101)
    res = ito_flow_simulate(oracle, diffusion, fields, y0, times, 100, seed=1)
    assert res.max_abs_residual < 0.02
    assert res.summary["exit_fraction"] == 0.0


def test_flow_is_independent_of_workers_and_batches():
    oracle, diffusion, fields, y0 = heat_ball_flow()
    times = np.linspace(0.0, 0.1, 51)
    a = ito_flow_simulate(oracle, diffusion, fields, y0, times, 40, seed=3)
    b = ito_flow_simulate(oracle, diffusion, fields, y0, times, 40, seed=3, workers=3, batch=7)
    np.testing.assert_array_equal(a.Y, b.Y)
    np.testing.assert_array_equal(a.residuals, b.residuals)
    assert a.summary == b.summary


def test_flow_residual_shrinks_with_step():
    oracle, diffusion, fields, y0 = heat_ball_flow()
    worst = []
    for dt, refine in ((4e-3, 4), (1e-3, 1)):
        times = np.linspace(0.0, 0.2, int(round(0.2 / dt)) + 1)
        res = ito_flow_simulate(oracle, diffusion, fields, y0, times, 200, seed=2, noise_refine=refine)
        worst.append(np.max(np.abs(res.mean_residual)))
    assert worst[1] < 0.5 * worst[0]


@pytest.mark.parametrize("regime", ["inward", "outward"])
def test_signed_regimes_keep_their_side(regime):
    oracle, diffusion, fields, y0 = heat_ball_flow(regime=regime)
    res = ito_flow_simulate(oracle, diffusion, fields, y0, np.linspace(0, 0.2, 201), 100, seed=4)
    assert res.sign_violations == 0
    expected = -1 if regime == "inward" else 1
    assert np.all(np.sign(res.residuals[-1]) == expected)


def test_flow_coefficients_tangential_diffusion_with_zero_fields():
    oracle = ball_oracle(static_ball([0.0, 0.0], 1.0))
    p = np.array([[0.0, 1.0]])
    drift, diff = flow_coefficients(oracle, np.zeros(1), np.zeros((1, 1)), p, np.zeros((1, 1)), np.ones((1, 1, 1)),
                                    None, np.array([[[1.0], [0.0]]]))
    # ζ = e₁ on the unit circle at (0, 1): curvature correction ½ ζᵀ ∂_y n ζ = ½
    np.testing.assert_allclose(drift, [[0.0, -0.5]])
    np.testing.assert_allclose(diff, [[[1.0], [0.0]]])


def test_unstable_field_leaves_tube():
    oracle = ball_oracle(static_ball([0.0, 0.0], 1.0), epsilon_band=0.05)
    fields = TangentFieldSpec(xi=lambda t, x, p: 5.0 * p)
    with pytest.raises(LeftTube):
        ito_flow_simulate(oracle, DiffusionSpec.brownian(1), fields, [[1.0, 0.0]], np.linspace(0, 0.1, 11), 10, 0)


def test_surjectivity_of_cloud_flow():
    oracle = ball_oracle(static_ball([0.0, 0.0], 1.0))
    th = 2 * np.pi * np.arange(400) / 400
    y0 = np.column_stack([np.cos(th), np.sin(th)])
    res = ito_flow_simulate(oracle, DiffusionSpec.brownian(1), TangentFieldSpec(), y0, np.linspace(0, 0.1, 11), 2, 0)
    assert surjectivity_check(res, oracle) < 0.02
