import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import central_gradient, central_hessian, refine_parabola_distance, sampled_curve_distance

from setvalued import (
    EmptyInterval,
    RadiusNonpositive,
    TooCloseToTerminal,
    ball_oracle,
    convexity_check,
    interval_oracle,
    mean_variance_oracle,
    nonconvex_oracle,
    product_graph_oracle,
    signed_distance,
)
from setvalued.reference_sets import (
    MeanVarianceSet,
    convexity_report,
    exp_heat_ball,
    heat_interval,
    nonconvex_curve,
    phi_second,
    slab_interval,
    static_ball,
    static_interval,
    symmetric_heat_interval,
)

# frozen: signed distance of (0, 1) to y2 = (y1)² is -sqrt(3)/2 (minimize s⁴ - s² + 1)
MV_DISTANCE_AT_UNIT_COEF = -0.8660254037844386


def test_mean_variance_distance_frozen_value():
    oracle = mean_variance_oracle(1.0)
    t = 1.0 - np.log(2.0)  # φ₁ = 1
    r = signed_distance(oracle, t, [0.0], [0.0, 1.0])
    assert r == pytest.approx(MV_DISTANCE_AT_UNIT_COEF, abs=1e-14)
    assert refine_parabola_distance([0.0, 1.0], 1.0, 0.0) == pytest.approx(-MV_DISTANCE_AT_UNIT_COEF, abs=1e-14)


@given(t=st.floats(0.0, 0.9), x=st.floats(-1, 1), y1=st.floats(-3, 3), y2=st.floats(-1, 4))
def test_mean_variance_distance_matches_independent_parabola(t, x, y1, y2):
    mv = MeanVarianceSet(1.0)
    coef = float(mv.phi1(t))
    r = signed_distance(mean_variance_oracle(1.0), t, [x], [y1, y2])
    exact = refine_parabola_distance([y1, y2], coef, x)
    assert abs(abs(r) - exact) <= 1e-9 * (1 + exact)
    assert (r < 0) == (y2 > coef * (y1 - x) ** 2)


def test_mean_variance_distance_agrees_with_sampling():
    mv = MeanVarianceSet(1.0)
    coef = float(mv.phi1(0.3))
    curve = lambda s: np.column_stack([0.2 + s, coef * s * s])  # noqa: E731
    for y in ([0.5, 0.1], [-1.0, 3.0], [2.0, 0.0]):
        d = sampled_curve_distance(y, curve, -8, 8)
        assert abs(signed_distance(mean_variance_oracle(1.0), 0.3, [0.2], y)) == pytest.approx(d, abs=1e-9)


@given(t=st.floats(0.0, 0.9), x=st.floats(-1, 1), y1=st.floats(-2, 2), coords=st.sampled_from(["raw", "transformed"]))
def test_mean_variance_bundle_matches_differences_on_graph(t, x, y1, coords):
    mv = MeanVarianceSet(1.0, coords)
    oracle = mean_variance_oracle(1.0, coords)
    y = np.array([y1, float(mv.boundary_y2(t, x, y1))])
    b = oracle.bundle(t, [x], y)

    def r(z):
        return signed_distance(oracle, z[0], [z[1]], z[2:])

    z = np.r_[t, x, y]
    g = central_gradient(r, z, h=1e-6)
    H = central_hessian(r, z, h=1e-4)
    np.testing.assert_allclose(np.r_[b.grad_t, b.grad_x[0], b.grad_y[0]], g, atol=2e-6)
    np.testing.assert_allclose(b.hess_yy[0], H[2:, 2:], atol=2e-4 * (1 + np.abs(H[2:, 2:]).max()))
    np.testing.assert_allclose(b.hess_xy[0], H[1:2, 2:], atol=2e-4 * (1 + np.abs(H[1:2, 2:]).max()))
    np.testing.assert_allclose(b.hess_xx[0], H[1:2, 1:2], atol=2e-4 * (1 + np.abs(H[1:2, 1:2]).max()))


def test_mean_variance_coordinates_are_consistent():
    raw, tr = MeanVarianceSet(1.0, "raw"), MeanVarianceSet(1.0, "transformed")
    y1 = np.linspace(-2, 2, 9)
    raw_pts = np.column_stack([y1, raw.boundary_y2(0.4, 0.3, y1)])
    np.testing.assert_allclose(tr.to_transformed(raw_pts)[:, 1], tr.boundary_y2(0.4, 0.3, y1), atol=1e-12)
    np.testing.assert_allclose(tr.to_raw(tr.to_transformed(raw_pts)), raw_pts, atol=1e-12)


def test_mean_variance_refuses_terminal_time():
    oracle = mean_variance_oracle(1.0, delta_min=1e-2)
    with pytest.raises(TooCloseToTerminal):
        oracle.bundle(0.995, [0.0], [0.0, 0.0])


@given(s=st.floats(0.2, 2.0), y1_frac=st.floats(-0.95, 0.95))
def test_phi_second_matches_differences(s, y1_frac):
    y1 = y1_frac * s

    def phi(v):
        return (1 + v * v) * np.sqrt(s * s - v * v)

    h = 1e-4 * s
    fd = (phi(y1 + h) - 2 * phi(y1) + phi(y1 - h)) / h**2
    assert phi_second(s, y1) == pytest.approx(fd, rel=1e-4, abs=1e-4)


def test_convexity_flips_at_threshold():
    T = 2.0
    edge = 1 / np.sqrt(2)
    assert convexity_check(T, T - (edge - 1e-3))
    assert not convexity_check(T, T - (edge + 1e-3))
    rep = convexity_report(T, T - (edge + 1e-3))
    assert rep["midpoint_violation"] > 0


def test_nonconvex_oracle_distance_is_zero_on_curve():
    T = 2.0
    oracle = nonconvex_oracle(T)
    th = np.linspace(0, 2 * np.pi, 17)
    pts = nonconvex_curve(1.5, th)[0]
    r = oracle.r(np.full(len(th), T - 1.5), np.zeros((len(th), 1)), pts)
    assert np.max(np.abs(r)) < 1e-9
    assert oracle.r(T - 1.5, [0.0], [0.0, 0.0])[0] < 0


def test_exp_heat_ball_solves_backward_heat_equation():
    ball = exp_heat_ball(1.0)
    t, x = np.array([0.3]), np.array([[0.4]])
    assert ball.u_t(t, x)[0] + 0.5 * ball.u_xx(t, x)[0, 0, 0] == pytest.approx(0.0, abs=1e-14)


def test_static_ball_rejects_nonpositive_radius():
    with pytest.raises(RadiusNonpositive):
        static_ball([0.0, 0.0], 0.0)


def test_collapsed_radius_is_reported():
    oracle = ball_oracle(exp_heat_ball(1.0, scale=-1.0))
    with pytest.raises(RadiusNonpositive):
        oracle.r(0.0, [0.0], [0.0, 0.0])


def test_interval_oracle_signs_and_normals():
    oracle = interval_oracle(static_interval(-1.0, 2.0))
    r = oracle.r(np.zeros(3), np.zeros((3, 1)), np.array([[0.0], [2.5], [-3.0]]))
    np.testing.assert_allclose(r, [-1.0, 0.5, 2.0])
    np.testing.assert_allclose(oracle.bundle(0.0, [0.0], [2.0]).grad_y, [[1.0]])
    np.testing.assert_allclose(oracle.bundle(0.0, [0.0], [-1.0]).grad_y, [[-1.0]])


def test_empty_intervals_are_rejected():
    with pytest.raises(EmptyInterval):
        static_interval(1.0, 1.0)
    with pytest.raises(EmptyInterval):
        symmetric_heat_interval(1.0, base=1.0, amplitude=1.0)


@given(t=st.floats(0.0, 0.9), x=st.floats(-3, 3), solves=st.booleans())
def test_symmetric_interval_endpoint_derivatives(t, x, solves):
    iv = symmetric_heat_interval(1.0, solves_heat=solves)
    tt, xx = np.array([t]), np.array([[x]])
    h = 1e-5
    up = lambda a, b: iv.upper(np.array([a]), np.array([[b]]))[0]  # noqa: E731
    assert iv.upper_t(tt, xx)[0] == pytest.approx((up(t + h, x) - up(t - h, x)) / (2 * h), abs=1e-8)
    assert iv.upper_x(tt, xx)[0, 0] == pytest.approx((up(t, x + h) - up(t, x - h)) / (2 * h), abs=1e-8)
    heat = iv.upper_t(tt, xx)[0] + 0.5 * iv.upper_xx(tt, xx)[0, 0, 0]
    if solves:
        assert heat == pytest.approx(0.0, abs=1e-14)
    else:
        assert abs(heat) > 0.0


def test_heat_interval_endpoints_solve_their_hjb():
    iv = heat_interval(1.0)
    t, x = np.array([0.2]), np.array([[0.7]])
    # upper: u_t + ½ u_xx + 1 = 0, lower: l_t + ½ l_xx - 1 = 0
    assert iv.upper_t(t, x)[0] + 0.5 * iv.upper_xx(t, x)[0, 0, 0] + 1 == pytest.approx(0.0, abs=1e-14)
    assert iv.lower_t(t, x)[0] + 0.5 * iv.lower_xx(t, x)[0, 0, 0] - 1 == pytest.approx(0.0, abs=1e-14)


@given(x=st.floats(-2, 2), off=st.floats(-0.05, 0.05), upper=st.booleans())
def test_slab_product_distance_is_scaled_distance(x, off, upper):
    po = product_graph_oracle(interval_oracle(slab_interval()))
    y = x + 1 + off if upper else x - 1 - off
    expected = off / np.sqrt(2)
    assert po.r(0.0, [x], [y])[0] == pytest.approx(expected, abs=1e-8)
