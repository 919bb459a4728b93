"""Control problems with known set values, paired with their oracles."""

from __future__ import annotations

import numpy as np

from .hamiltonian import ControlProblem, ControlSet
from .reference_sets import MeanVarianceSet, heat_center_ball

__all__ = ["heat_ball_problem", "mean_variance_problem", "scalar_interval_problem"]


def heat_ball_problem(T: float = 1.0, amplitude=(0.05, 0.05), drift=(0.0, 0.0), resolution: int = 64):
    """Two-dimensional backward system with ``f = f0 + a``, ``|a| <= 1``, ``b = 0``, ``σ = 1``.

    Its set value is the ball of radius ``T - t`` around the heat-equation
    solution ``w`` built by :func:`heat_center_ball`.  Returns
    ``(problem, ball)``; the closed-form maximizer is ``a* = n`` and
    ``zeta* = (I - n nᵀ) ∂_x w``.
    """
    f0 = np.asarray(drift, float)
    ball = heat_center_ball(T, amplitude, drift=drift)

    def b(t, x, a):
        return np.zeros((len(a), 1))

    def sigma(t, x, a):
        return np.ones((len(a), 1, 1))

    def f(t, x, y, z, a):
        return f0 + a

    def g(x):
        return ball.w(np.full(len(x), T), x)

    def closed_form(t, x, y, intr):
        # ∂_x n = -(I - n nᵀ) ∂_x w / (T - t) for this ball
        zeta = -(T - t)[:, None, None] * intr.dx_n
        return intr.normal.copy(), zeta

    problem = ControlProblem(
        d=1,
        m=2,
        b=b,
        sigma=sigma,
        f=f,
        g=g,
        control_set=ControlSet(kind="ball", dim=2, radius=1.0, resolution=resolution),
        z_affine=True,
        closed_form=closed_form,
        name="heat-ball",
    )
    return problem, ball


def mean_variance_problem(T: float = 1.0, search=(-5.0, 5.0), resolution: int = 64) -> ControlProblem:
    """Mean-variance dynamics ``dX = a dt + a dB`` in transformed coordinates.

    The backward driver is ``(0, z1²)``; controls are unconstrained (the
    ``search`` box only seeds the grid).
    """
    mv = MeanVarianceSet(T, "transformed")

    def b(t, x, a):
        return a[:, :1].copy()

    def sigma(t, x, a):
        return a[:, :1, None].copy()

    def f(t, x, y, z, a):
        out = np.zeros((len(z), 2))
        out[:, 1] = z[:, 0, 0] ** 2
        return out

    def g(x):
        return np.column_stack([x[:, 0], np.zeros(len(x))])

    def closed_form(t, x, y, intr):
        p1, p2, p3 = mv.phis(t, x[:, 0], y[:, 0])
        a = ((1 + p1) * (y[:, 0] - x[:, 0]))[:, None]
        z0 = p2 * (p1 - p2**2) / (2 * p1 * p3**2)
        zeta = (z0[:, None] * np.column_stack([np.ones_like(p2), p2]))[:, :, None]
        return a, zeta

    return ControlProblem(
        d=1,
        m=2,
        b=b,
        sigma=sigma,
        f=f,
        g=g,
        control_set=ControlSet(kind="free", dim=1, lower=(search[0],), upper=(search[1],), resolution=resolution),
        z_affine=False,
        closed_form=closed_form,
        name="mean-variance",
    )


def scalar_interval_problem(width: float = 1.0, resolution: int = 64, g=np.sin) -> ControlProblem:
    """``m = d = 1``, ``b = 0``, ``σ = 1``, ``f = a`` with ``a ∈ [-width, width]``."""

    def b(t, x, a):
        return np.zeros((len(a), 1))

    def sigma(t, x, a):
        return np.ones((len(a), 1, 1))

    def f(t, x, y, z, a):
        return a[:, :1].copy()

    return ControlProblem(
        d=1,
        m=1,
        b=b,
        sigma=sigma,
        f=f,
        g=lambda x: g(x[:, :1]),
        control_set=ControlSet(kind="box", dim=1, lower=(-width,), upper=(width,), resolution=resolution),
        z_affine=True,
        name="scalar-interval",
    )
