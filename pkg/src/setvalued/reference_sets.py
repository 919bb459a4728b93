"""Closed-form set-valued families used as oracles throughout the package."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .errors import EmptyInterval, RadiusNonpositive, TooCloseToTerminal
from .geometry import DerivativeBundle, FDSteps, SetOracle

__all__ = [
    "BallSet",
    "ball_oracle",
    "static_ball",
    "translating_ball",
    "exp_heat_ball",
    "heat_center_ball",
    "MeanVarianceSet",
    "mean_variance_oracle",
    "level_set_bundle",
    "parabola_closest",
    "NonconvexSet",
    "nonconvex_oracle",
    "nonconvex_curve",
    "phi_second",
    "convexity_check",
    "convexity_report",
    "IntervalSet",
    "interval_oracle",
    "static_interval",
    "slab_interval",
    "heat_interval",
    "symmetric_heat_interval",
    "product_graph_oracle",
]

Batch = Callable[..., np.ndarray]


# ---------------------------------------------------------------------------
# balls |y - w(t, x)| <= u(t, x)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BallSet:
    """Ball with moving centre ``w`` and radius ``u`` plus their derivatives.

    Batched shapes: ``w, w_t (N, m)``, ``w_x (N, m, d)``, ``w_xx (N, m, d, d)``,
    ``u, u_t (N,)``, ``u_x (N, d)``, ``u_xx (N, d, d)``.
    """

    d: int
    m: int
    w: Batch
    w_t: Batch
    w_x: Batch
    w_xx: Batch
    u: Batch
    u_t: Batch
    u_x: Batch
    u_xx: Batch
    horizon: float | None = None
    name: str = "ball"


def _radius(ball: BallSet, t, x) -> np.ndarray:
    u = np.asarray(ball.u(t, x), dtype=float)
    if np.any(u <= 0):
        raise RadiusNonpositive(f"{ball.name}: radius {np.min(u):.3g} <= 0")
    return u


def _ball_bundle(ball: BallSet, t, x, y) -> DerivativeBundle:
    q = y - ball.w(t, x)
    rho = np.linalg.norm(q, axis=1)
    n = q / rho[:, None]
    m = ball.m
    P = np.eye(m)[None] - n[:, :, None] * n[:, None, :]
    wx = ball.w_x(t, x)
    grad_t = -np.einsum("nk,nk->n", n, ball.w_t(t, x)) - ball.u_t(t, x)
    grad_x = -np.einsum("nk,nki->ni", n, wx) - ball.u_x(t, x)
    hess_yy = P / rho[:, None, None]
    hess_xy = -np.einsum("nkl,nli->nik", P, wx) / rho[:, None, None]
    hess_xx = (
        np.einsum("nki,nkl,nlj->nij", wx, P, wx) / rho[:, None, None]
        - np.einsum("nk,nkij->nij", n, ball.w_xx(t, x))
        - ball.u_xx(t, x)
    )
    return DerivativeBundle(grad_t, grad_x, n, hess_xx, hess_xy, hess_yy)


def ball_oracle(ball: BallSet, *, epsilon_band: float = 0.25, delta_min: float | None = None) -> SetOracle:
    """Signed distance ``|y - w| - u`` with the analytic derivative bundle."""

    def r(t, x, y):
        return np.linalg.norm(y - ball.w(t, x), axis=1) - _radius(ball, t, x)

    def derivs(t, x, y):
        _radius(ball, t, x)
        return _ball_bundle(ball, t, x, y)

    return SetOracle(
        r_eval=r,
        d=ball.d,
        m=ball.m,
        derivs=derivs,
        epsilon_band=epsilon_band,
        horizon=ball.horizon,
        delta_min=delta_min,
        name=ball.name,
    )


def _zeros(*shape):
    def f(t, x):
        return np.zeros((np.shape(x)[0],) + shape)

    return f


def static_ball(center, radius: float, d: int = 1) -> BallSet:
    c = np.asarray(center, dtype=float)
    if radius <= 0:
        raise RadiusNonpositive(f"radius {radius} <= 0")
    m = c.size
    return BallSet(
        d=d,
        m=m,
        w=lambda t, x: np.broadcast_to(c, (np.shape(x)[0], m)).copy(),
        w_t=_zeros(m),
        w_x=_zeros(m, d),
        w_xx=_zeros(m, d, d),
        u=lambda t, x: np.full(np.shape(x)[0], float(radius)),
        u_t=_zeros(),
        u_x=_zeros(d),
        u_xx=_zeros(d, d),
        name="static-ball",
    )


def translating_ball(m: int = 2, radius: float = 1.0) -> BallSet:
    """Centre ``(x, 0, ..., 0)`` for scalar ``x``; unit radius by default."""

    def w(t, x):
        out = np.zeros((np.shape(x)[0], m))
        out[:, 0] = x[:, 0]
        return out

    def w_x(t, x):
        out = np.zeros((np.shape(x)[0], m, 1))
        out[:, 0, 0] = 1.0
        return out

    return BallSet(
        d=1,
        m=m,
        w=w,
        w_t=_zeros(m),
        w_x=w_x,
        w_xx=_zeros(m, 1, 1),
        u=lambda t, x: np.full(np.shape(x)[0], float(radius)),
        u_t=_zeros(),
        u_x=_zeros(1),
        u_xx=_zeros(1, 1),
        name="translating-ball",
    )


def exp_heat_ball(T: float, m: int = 2, scale: float = 1.0) -> BallSet:
    """Centre 0, radius ``scale * exp(x + (T - t)/2)``: a backward heat solution."""

    def u(t, x):
        return scale * np.exp(x[:, 0] + 0.5 * (T - t))

    return BallSet(
        d=1,
        m=m,
        w=_zeros(m),
        w_t=_zeros(m),
        w_x=_zeros(m, 1),
        w_xx=_zeros(m, 1, 1),
        u=u,
        u_t=lambda t, x: -0.5 * u(t, x),
        u_x=lambda t, x: u(t, x)[:, None],
        u_xx=lambda t, x: u(t, x)[:, None, None],
        name="exp-heat-ball",
    )


def heat_center_ball(
    T: float,
    amplitude=(0.3, 0.3),
    offset=(0.0, 0.0),
    drift=(0.0, 0.0),
    radius: Callable | None = None,
) -> BallSet:
    """Ball of radius ``T - t`` whose centre solves ``w_t + ½ w_xx + drift = 0``.

    Centre: ``offset + (A1 e^{x+(T-t)/2}, A2 sin(x) e^{-(T-t)/2}) + drift (T - t)``.
    ``radius`` optionally replaces ``T - t`` by ``(rho, rho_t)`` callables of
    ``t`` (used for negative controls).
    """
    a1, a2 = map(float, amplitude)
    off = np.asarray(offset, dtype=float)
    f0 = np.asarray(drift, dtype=float)

    def parts(t, x):
        s = T - t
        e1 = a1 * np.exp(x[:, 0] + 0.5 * s)
        sn = np.sin(x[:, 0]) * np.exp(-0.5 * s)
        cs = np.cos(x[:, 0]) * np.exp(-0.5 * s)
        return s, e1, sn, cs

    def w(t, x):
        s, e1, sn, cs = parts(t, x)
        return off + np.column_stack([e1, a2 * sn]) + s[:, None] * f0

    def w_t(t, x):
        s, e1, sn, cs = parts(t, x)
        return np.column_stack([-0.5 * e1, 0.5 * a2 * sn]) - f0

    def w_x(t, x):
        s, e1, sn, cs = parts(t, x)
        return np.column_stack([e1, a2 * cs])[:, :, None]

    def w_xx(t, x):
        s, e1, sn, cs = parts(t, x)
        return np.column_stack([e1, -a2 * sn])[:, :, None, None]

    if radius is None:
        rho = lambda t: T - t  # noqa: E731
        rho_t = lambda t: -np.ones_like(t)  # noqa: E731
    else:
        rho, rho_t = radius

    return BallSet(
        d=1,
        m=2,
        w=w,
        w_t=w_t,
        w_x=w_x,
        w_xx=w_xx,
        u=lambda t, x: np.broadcast_to(rho(np.asarray(t, float)), (np.shape(x)[0],)).astype(float),
        u_t=lambda t, x: np.broadcast_to(rho_t(np.asarray(t, float)), (np.shape(x)[0],)).astype(float),
        u_x=_zeros(1),
        u_xx=_zeros(1, 1),
        horizon=T,
        name="heat-ball",
    )


# ---------------------------------------------------------------------------
# implicit boundaries {F = 0}
# ---------------------------------------------------------------------------


def level_set_bundle(Ft, Fx, Fy, Fxx, Fxy, Fyy) -> DerivativeBundle:
    """Derivatives of the signed distance to ``{F = 0}`` at points where ``F = 0``.

    ``F`` is negative inside.  Shapes: ``Ft (N,)``, ``Fx (N, d)``, ``Fy (N, m)``,
    ``Fxx (N, d, d)``, ``Fxy (N, d, m)``, ``Fyy (N, m, m)``.
    """
    G = np.linalg.norm(Fy, axis=1)
    n = Fy / G[:, None]
    m = Fy.shape[1]
    P = np.eye(m)[None] - n[:, :, None] * n[:, None, :]
    Gi = 1.0 / G
    grad_x = Fx * Gi[:, None]
    Fyy_n = np.einsum("nkl,nl->nk", Fyy, n)
    hess_yy = P @ Fyy @ P * Gi[:, None, None]
    hess_xy = (np.einsum("nkl,nil->nik", P, Fxy) - grad_x[:, :, None] * np.einsum("nkl,nl->nk", P, Fyy_n)[:, None, :]) * Gi[
        :, None, None
    ]
    nFxy = np.einsum("nil,nl->ni", Fxy, n)  # ∇_x G
    d_x = Fxx * Gi[:, None, None] - Fx[:, :, None] * nFxy[:, None, :] * (Gi**2)[:, None, None]
    dy_of_fx = Fxy * Gi[:, None, None] - Fx[:, :, None] * Fyy_n[:, None, :] * (Gi**2)[:, None, None]
    hess_xx = d_x - np.einsum("nil,nl->ni", dy_of_fx, n)[:, :, None] * grad_x[:, None, :]
    hess_xx = 0.5 * (hess_xx + np.transpose(hess_xx, (0, 2, 1)))
    return DerivativeBundle(Ft * Gi, grad_x, n, hess_xx, hess_xy, hess_yy)


def parabola_closest(a, v1, v2, p1, p2) -> np.ndarray:
    """Offset ``s`` of the point ``(v1 + s, v2 + a s²)`` nearest to ``(p1, p2)``."""
    a = np.broadcast_to(np.asarray(a, float), np.shape(p1))
    P1 = np.asarray(p1, float) - v1
    P2 = np.asarray(p2, float) - v2
    # stationarity: 2a² s³ + (1 - 2a P2) s - P1 = 0  ->  s³ + p s + q = 0
    p = (1.0 - 2.0 * a * P2) / (2.0 * a * a)
    q = -P1 / (2.0 * a * a)
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    s = np.empty_like(P1)
    one = disc >= 0
    if np.any(one):
        qq, pp, dd = q[one], p[one], disc[one]
        wv = -qq / 2.0 + np.where(qq <= 0, 1.0, -1.0) * np.sqrt(dd)
        c = np.cbrt(wv)
        with np.errstate(divide="ignore", invalid="ignore"):
            root = np.where(c != 0, c - pp / (3.0 * c), 0.0)
        s[one] = root
    three = ~one
    if np.any(three):
        qq, pp = q[three], p[three]
        mag = 2.0 * np.sqrt(-pp / 3.0)
        arg = np.clip(3.0 * qq / (pp * mag), -1.0, 1.0)
        phi = np.arccos(arg) / 3.0
        roots = np.stack([mag * np.cos(phi - 2.0 * np.pi * k / 3.0) for k in range(3)], axis=1)
        aa = a[three][:, None]
        dist = (roots - P1[three][:, None]) ** 2 + (aa * roots**2 - P2[three][:, None]) ** 2
        s[three] = roots[np.arange(len(roots)), np.argmin(dist, axis=1)]
    for _ in range(3):
        f = 2 * a * a * s**3 + (1 - 2 * a * P2) * s - P1
        fp = 6 * a * a * s**2 + (1 - 2 * a * P2)
        ok = np.abs(fp) > 1e-300
        s = np.where(ok, s - np.where(ok, f / np.where(ok, fp, 1.0), 0.0), s)
    return s


@dataclass(frozen=True)
class MeanVarianceSet:
    """Attainable (mean, second moment) set of the linear mean-variance problem.

    ``coordinates="raw"`` is the epigraph in ``(E X_T, E X_T²)``;
    ``"transformed"`` applies ``(y1, y2) -> (y1, y2 - y1²)`` and yields the
    convex parabola ``y2 >= phi1(t) (y1 - x)²``.
    """

    T: float
    coordinates: str = "transformed"
    delta_min: float | None = None

    def __post_init__(self):
        if self.coordinates not in ("raw", "transformed"):
            raise ValueError("coordinates must be 'raw' or 'transformed'")

    @property
    def dmin(self) -> float:
        return self.delta_min if self.delta_min is not None else 1e-3 * self.T

    def phi1(self, t):
        return 1.0 / np.expm1(self.T - np.asarray(t, float))

    def phi1_t(self, t):
        p = self.phi1(t)
        return p * (1.0 + p)

    def phis(self, t, x, y1):
        """``(phi1, phi2, phi3)`` at ``(t, x)`` and first coordinate ``y1``."""
        p1 = self.phi1(t)
        p2 = 2.0 * p1 * (np.asarray(y1) - x)
        return p1, p2, np.sqrt(1.0 + p2 * p2)

    def parabola(self, t, x):
        """Leading coefficient and vertex of the boundary parabola."""
        p1 = self.phi1(t)
        if self.coordinates == "transformed":
            return p1, x, np.zeros_like(x)
        a = 1.0 + p1
        return a, p1 * x / a, p1 * x * x / a

    def boundary_y2(self, t, x, y1):
        a, v1, v2 = self.parabola(t, x)
        return v2 + a * (np.asarray(y1) - v1) ** 2

    def to_transformed(self, y):
        y = np.asarray(y, float)
        return np.stack([y[..., 0], y[..., 1] - y[..., 0] ** 2], axis=-1)

    def to_raw(self, y):
        y = np.asarray(y, float)
        return np.stack([y[..., 0], y[..., 1] + y[..., 0] ** 2], axis=-1)

    def guard(self, t) -> None:
        if np.any(np.asarray(t) > self.T - self.dmin + 1e-15):
            raise TooCloseToTerminal(f"t={np.max(t):.6g} beyond T - delta_min = {self.T - self.dmin:.6g}")


def _mv_r(mv: MeanVarianceSet, t, x, y):
    a, v1, v2 = mv.parabola(t, x[:, 0])
    s = parabola_closest(a, v1, v2, y[:, 0], y[:, 1])
    dist = np.hypot(v1 + s - y[:, 0], v2 + a * s * s - y[:, 1])
    inside = y[:, 1] > v2 + a * (y[:, 0] - v1) ** 2
    return np.where(inside, -dist, dist)


def _mv_bundle(mv: MeanVarianceSet, t, x, y) -> DerivativeBundle:
    x1 = x[:, 0]
    a, v1, v2 = mv.parabola(t, x1)
    s = parabola_closest(a, v1, v2, y[:, 0], y[:, 1])
    b1 = v1 + s  # boundary point (b1, b2); F is evaluated there
    p1 = mv.phi1(t)
    dp1 = mv.phi1_t(t)
    N = len(x1)
    e = b1 - x1
    # F = phi1 (y1 - x)² - y2           (transformed)
    # F = y1² + phi1 (y1 - x)² - y2     (raw)
    Ft = dp1 * e * e
    Fx = (-2.0 * p1 * e)[:, None]
    extra = 2.0 * b1 if mv.coordinates == "raw" else 0.0
    Fy = np.column_stack([2.0 * p1 * e + extra, -np.ones(N)])
    Fxx = (2.0 * p1)[:, None, None] * np.ones((N, 1, 1))
    Fxy = np.zeros((N, 1, 2))
    Fxy[:, 0, 0] = -2.0 * p1
    Fyy = np.zeros((N, 2, 2))
    Fyy[:, 0, 0] = 2.0 * p1 + (2.0 if mv.coordinates == "raw" else 0.0)
    return level_set_bundle(Ft, Fx, Fy, Fxx, Fxy, Fyy)


def mean_variance_oracle(T: float, coordinates: str = "transformed", *, delta_min: float | None = None,
                         epsilon_band: float = 0.25) -> SetOracle:
    """Oracle for the mean-variance set.

    The analytic bundle is exact on the graph.  Off the graph, first
    derivatives are exact (they are constant along normals) while second
    derivatives are those of the nearest boundary point.
    """
    mv = MeanVarianceSet(T, coordinates, delta_min)

    def r(t, x, y):
        return _mv_r(mv, t, x, y)

    def derivs(t, x, y):
        mv.guard(t)
        return _mv_bundle(mv, t, x, y)

    return SetOracle(
        r_eval=r,
        d=1,
        m=2,
        derivs=derivs,
        epsilon_band=epsilon_band,
        horizon=T,
        delta_min=mv.dmin,
        name=f"mean-variance-{coordinates}",
    )


# ---------------------------------------------------------------------------
# nonconvex closed curve
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NonconvexSet:
    """Region bounded by ``θ -> (s cos θ, s (1 + s² cos² θ) sin θ)``, ``s = T - t``."""

    T: float
    grid: int = 2048
    newton_steps: int = 10


def nonconvex_curve(s, theta):
    """Boundary point and its first two θ-derivatives, each shaped ``(..., 2)``."""
    c, sn = np.cos(theta), np.sin(theta)
    Y = np.stack([s * c, s * (1 + s * s * c * c) * sn], axis=-1)
    dY = np.stack([-s * sn, s * c * (1 + s * s * c * c - 2 * s * s * sn * sn)], axis=-1)
    ddY = np.stack([-s * c, s * sn * (-1 - 7 * s * s * c * c + 2 * s * s * sn * sn)], axis=-1)
    return Y, dY, ddY


def _nonconvex_inside(s, y):
    y1, y2 = y[..., 0], y[..., 1]
    inside = np.abs(y1) < s
    h = np.where(inside, (1 + y1 * y1) * np.sqrt(np.maximum(s * s - y1 * y1, 0.0)), 0.0)
    return inside & (np.abs(y2) < h)


def _nonconvex_r(ns: NonconvexSet, t, x, y):
    s = ns.T - np.asarray(t, float)
    th = 2 * np.pi * np.arange(ns.grid) / ns.grid
    out = np.empty(len(y))
    for su in np.unique(s):
        idx = np.flatnonzero(s == su)
        Yg, _, _ = nonconvex_curve(su, th)
        pts = y[idx]
        d2 = np.sum((pts[:, None, :] - Yg[None]) ** 2, axis=2)
        best = th[np.argmin(d2, axis=1)]
        for _ in range(ns.newton_steps):
            Y, dY, ddY = nonconvex_curve(su, best)
            diff = Y - pts
            g = np.sum(diff * dY, axis=1)
            h = np.sum(dY * dY, axis=1) + np.sum(diff * ddY, axis=1)
            best = np.where(h > 0, best - g / np.where(h > 0, h, 1.0), best)
        Y, _, _ = nonconvex_curve(su, best)
        dist = np.linalg.norm(Y - pts, axis=1)
        dist = np.minimum(dist, np.sqrt(np.min(d2, axis=1)))
        out[idx] = np.where(_nonconvex_inside(su, pts), -dist, dist)
    return out


def nonconvex_oracle(T: float, *, epsilon_band: float = 0.1, grid: int = 2048) -> SetOracle:
    """Finite-difference oracle (the family only has a parametric boundary)."""
    ns = NonconvexSet(T, grid)
    return SetOracle(
        r_eval=lambda t, x, y: _nonconvex_r(ns, t, x, y),
        d=1,
        m=2,
        derivs=None,
        fd_steps=FDSteps(),
        epsilon_band=epsilon_band,
        horizon=T,
        name="nonconvex",
    )


def phi_second(s, y1):
    """Second derivative of the upper boundary ``(1 + y1²) sqrt(s² - y1²)``."""
    y1 = np.asarray(y1, float)
    return (6 * y1**4 - 9 * s * s * y1**2 + 2 * s**4 - s * s) / (s * s - y1 * y1) ** 1.5


def _midpoint_violation(s: float, n_theta: int = 256, n_sym: int = 400) -> float:
    """Largest amount by which a chord midpoint leaves the set (``<= 0`` when none do)."""
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    h = np.concatenate([np.geomspace(1e-4 * s, s * (1 - 1e-9), n_sym)])
    th_sym = np.arccos(h / s)
    pts, _, _ = nonconvex_curve(s, th)
    A, _, _ = nonconvex_curve(s, th_sym)
    B, _, _ = nonconvex_curve(s, np.pi - th_sym)
    mids = [0.5 * (pts[:, None, :] + pts[None, :, :]).reshape(-1, 2), 0.5 * (A + B), 0.5 * (A * [1, -1] + B * [1, -1])]
    mid = np.concatenate(mids)
    y1, y2 = mid[:, 0], mid[:, 1]
    height = (1 + y1 * y1) * np.sqrt(np.maximum(s * s - y1 * y1, 0.0))
    return float(np.max(np.maximum(np.abs(y2) - height, np.abs(y1) - s)))


def convexity_report(T: float, t: float) -> dict:
    """Three independent convexity verdicts for the nonconvex family at time ``t``."""
    s = T - t
    if s <= 0:
        raise TooCloseToTerminal("convexity needs t < T")
    y1 = np.concatenate([[0.0], np.linspace(-s, s, 4001)[1:-1]])
    num = 6 * y1**4 - 9 * s * s * y1**2 + 2 * s**4 - s * s
    viol = _midpoint_violation(s)
    return {
        "threshold": bool(s <= 1 / np.sqrt(2)),
        "phi_second": bool(np.max(num) <= 1e-15),
        "midpoint": bool(viol <= 1e-13),
        "midpoint_violation": viol,
    }


def convexity_check(T: float, t: float) -> bool:
    """``True`` iff the region is convex at time ``t`` (i.e. ``T - t <= 1/√2``).

    The threshold decision is cross-checked against the sign of ``φ''`` and a
    sampled chord-midpoint test; disagreement raises ``RuntimeError``.
    """
    rep = convexity_report(T, t)
    verdicts = {rep["threshold"], rep["phi_second"], rep["midpoint"]}
    if len(verdicts) != 1:
        raise RuntimeError(f"convexity tests disagree at T - t = {T - t}: {rep}")
    return rep["threshold"]


# ---------------------------------------------------------------------------
# intervals [lower, upper] (m = 1)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntervalSet:
    """Interval family ``[lower(t, x), upper(t, x)]`` with optional derivatives.

    Batched shapes: values and ``*_t`` are ``(N,)``, ``*_x`` are ``(N, d)``,
    ``*_xx`` are ``(N, d, d)``.
    """

    lower: Batch
    upper: Batch
    d: int = 1
    lower_t: Batch | None = None
    lower_x: Batch | None = None
    lower_xx: Batch | None = None
    upper_t: Batch | None = None
    upper_x: Batch | None = None
    upper_xx: Batch | None = None
    horizon: float | None = None
    name: str = "interval"

    @property
    def analytic(self) -> bool:
        return None not in (self.lower_t, self.lower_x, self.lower_xx, self.upper_t, self.upper_x, self.upper_xx)


def _interval_ends(iv: IntervalSet, t, x):
    lo = np.asarray(iv.lower(t, x), float)
    hi = np.asarray(iv.upper(t, x), float)
    if np.any(lo >= hi):
        raise EmptyInterval(f"{iv.name}: lower >= upper")
    return lo, hi


def interval_oracle(iv: IntervalSet, *, epsilon_band: float = 0.25) -> SetOracle:
    """``r = max(lower - y, y - upper)``; normals ``±1`` and no tangent directions."""

    def r(t, x, y):
        lo, hi = _interval_ends(iv, t, x)
        return np.maximum(lo - y[:, 0], y[:, 0] - hi)

    derivs = None
    if iv.analytic:

        def derivs(t, x, y):
            lo, hi = _interval_ends(iv, t, x)
            up = (y[:, 0] - hi) >= (lo - y[:, 0])
            sgn = np.where(up, 1.0, -1.0)
            N = len(t)
            grad_t = np.where(up, -iv.upper_t(t, x), iv.lower_t(t, x))
            grad_x = np.where(up[:, None], -iv.upper_x(t, x), iv.lower_x(t, x))
            hess_xx = np.where(up[:, None, None], -iv.upper_xx(t, x), iv.lower_xx(t, x))
            return DerivativeBundle(
                grad_t, grad_x, sgn[:, None], hess_xx, np.zeros((N, iv.d, 1)), np.zeros((N, 1, 1))
            )

    return SetOracle(
        r_eval=r, d=iv.d, m=1, derivs=derivs, epsilon_band=epsilon_band, horizon=iv.horizon, name=iv.name
    )


def static_interval(lower: float, upper: float, d: int = 1) -> IntervalSet:
    if lower >= upper:
        raise EmptyInterval(f"[{lower}, {upper}] is empty")
    const = lambda v: (lambda t, x: np.full(np.shape(x)[0], float(v)))  # noqa: E731
    return IntervalSet(
        lower=const(lower),
        upper=const(upper),
        d=d,
        lower_t=_zeros(),
        lower_x=_zeros(d),
        lower_xx=_zeros(d, d),
        upper_t=_zeros(),
        upper_x=_zeros(d),
        upper_xx=_zeros(d, d),
        name="static-interval",
    )


def slab_interval(half_width: float = 1.0) -> IntervalSet:
    """``[x - h, x + h]`` for scalar ``x``."""
    one = lambda t, x: np.ones((np.shape(x)[0], 1))  # noqa: E731
    return IntervalSet(
        lower=lambda t, x: x[:, 0] - half_width,
        upper=lambda t, x: x[:, 0] + half_width,
        lower_t=_zeros(),
        lower_x=one,
        lower_xx=_zeros(1, 1),
        upper_t=_zeros(),
        upper_x=one,
        upper_xx=_zeros(1, 1),
        name="slab",
    )


def heat_interval(T: float, width: float = 1.0) -> IntervalSet:
    """``sin(x) e^{-(T-t)/2} ± width (T - t)``: value interval for ``g = sin``, drift ``a ∈ [-w, w]``."""

    def heat(t, x):
        return np.sin(x[:, 0]) * np.exp(-0.5 * (T - t))

    def heat_x(t, x):
        return (np.cos(x[:, 0]) * np.exp(-0.5 * (T - t)))[:, None]

    def heat_xx(t, x):
        return -heat(t, x)[:, None, None]

    return IntervalSet(
        lower=lambda t, x: heat(t, x) - width * (T - t),
        upper=lambda t, x: heat(t, x) + width * (T - t),
        lower_t=lambda t, x: 0.5 * heat(t, x) + width,
        lower_x=heat_x,
        lower_xx=heat_xx,
        upper_t=lambda t, x: 0.5 * heat(t, x) - width,
        upper_x=heat_x,
        upper_xx=heat_xx,
        horizon=T,
        name="heat-interval",
    )


def symmetric_heat_interval(T: float, base: float = 2.0, amplitude: float = 1.0, *, solves_heat: bool = True
                            ) -> IntervalSet:
    """``[-u, u]`` with ``u = base + amplitude sin(x) e^{-(T-t)/2}``, a heat-equation solution.

    ``solves_heat=False`` swaps in ``u = base + (T-t)² + amplitude sin(x)``,
    which violates the heat equation (negative control).
    """
    if base <= abs(amplitude):
        raise EmptyInterval("base must exceed |amplitude| so that u > 0")

    if solves_heat:
        def u(t, x):
            return base + amplitude * np.sin(x[:, 0]) * np.exp(-0.5 * (T - t))

        def u_t(t, x):
            return 0.5 * amplitude * np.sin(x[:, 0]) * np.exp(-0.5 * (T - t))

        def u_x(t, x):
            return (amplitude * np.cos(x[:, 0]) * np.exp(-0.5 * (T - t)))[:, None]

        def u_xx(t, x):
            return (-amplitude * np.sin(x[:, 0]) * np.exp(-0.5 * (T - t)))[:, None, None]
    else:
        def u(t, x):
            return base + (T - t) ** 2 + amplitude * np.sin(x[:, 0])

        def u_t(t, x):
            return -2.0 * (T - t) + 0.0 * x[:, 0]

        def u_x(t, x):
            return (amplitude * np.cos(x[:, 0]))[:, None]

        def u_xx(t, x):
            return (-amplitude * np.sin(x[:, 0]))[:, None, None]

    return IntervalSet(
        lower=lambda t, x: -u(t, x),
        upper=u,
        lower_t=lambda t, x: -u_t(t, x),
        lower_x=lambda t, x: -u_x(t, x),
        lower_xx=lambda t, x: -u_xx(t, x),
        upper_t=u_t,
        upper_x=u_x,
        upper_xx=u_xx,
        horizon=T,
        name="symmetric-heat-interval" if solves_heat else "symmetric-nonsolution",
    )


# ---------------------------------------------------------------------------
# joint (x, y) set
# ---------------------------------------------------------------------------


def product_graph_oracle(inner: SetOracle, *, epsilon_band: float | None = None) -> SetOracle:
    """Signed distance of ``{(x, y) : y ∈ V(t, x)}`` measured jointly in ``(x, y)``.

    ``r̂² = min_x̃ |x - x̃|² + r_V(t, x̃, y)²``; the sign is that of ``r_V``.
    The returned oracle keeps the ``(t, x, y)`` signature and uses finite
    differences.
    """
    d = inner.d

    def one(t, x, y):
        r0 = float(inner.r(t, x, y)[0])
        if r0 == 0.0:
            return 0.0

        def obj(xt):
            xt = np.atleast_1d(xt)
            return float(np.sum((x - xt) ** 2) + inner.r(t, xt, y)[0] ** 2)

        rad = abs(r0)
        if d == 1:
            res = minimize_scalar(
                obj, bounds=(x[0] - rad, x[0] + rad), method="bounded", options={"xatol": 1e-13, "maxiter": 500}
            )
            val = min(res.fun, r0 * r0)
        else:
            res = minimize(obj, x, method="BFGS", options={"gtol": 1e-12})
            val = min(res.fun, r0 * r0)
        return float(np.copysign(np.sqrt(max(val, 0.0)), r0))

    def r(t, x, y):
        return np.array([one(t[i], x[i], y[i]) for i in range(len(t))])

    return SetOracle(
        r_eval=r,
        d=d,
        m=inner.m,
        derivs=None,
        epsilon_band=inner.epsilon_band if epsilon_band is None else epsilon_band,
        horizon=inner.horizon,
        name=f"product({inner.name})",
    )
