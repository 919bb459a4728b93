"""Independent reference computations used only by the tests.

None of these reuse package internals: distances come from dense boundary
sampling, derivatives from plain central differences, and moments from an
ODE integrated by scipy.
"""

import numpy as np
from scipy.integrate import solve_ivp


def sampled_distance(point, boundary):
    """Distance from ``point`` to a densely sampled curve ``(k, 2)``."""
    return float(np.min(np.linalg.norm(boundary - np.asarray(point)[None], axis=1)))


def sampled_curve_distance(point, curve, lo, hi, count=20_001, rounds=3):
    """Distance from ``point`` to ``curve(θ)`` for θ in ``[lo, hi]`` by repeated zoomed sweeps."""
    point = np.asarray(point, float)
    for _ in range(rounds):
        th = np.linspace(lo, hi, count)
        d = np.linalg.norm(curve(th) - point[None], axis=1)
        k = int(np.argmin(d))
        h = th[1] - th[0]
        lo, hi = th[k] - 2 * h, th[k] + 2 * h
    return float(d[k])


def parabola_samples(coef, center, half_width=6.0, count=400_001):
    """Points of ``y2 = coef (y1 - center)²`` on a dense grid."""
    y1 = np.linspace(center - half_width, center + half_width, count)
    return np.column_stack([y1, coef * (y1 - center) ** 2])


def refine_parabola_distance(point, coef, center):
    """Distance to the parabola from the cubic stationarity condition, solved by numpy roots."""
    p1, p2 = point[0] - center, point[1]
    # d/ds [(s - p1)² + (coef s² - p2)²] = 0
    roots = np.roots([4 * coef**2, 0.0, 2 - 4 * coef * p2, -2 * p1])
    s = roots[np.abs(roots.imag) < 1e-9].real
    return float(np.min(np.hypot(s - p1, coef * s * s - p2)))


def central_gradient(fun, z, h=1e-6):
    z = np.asarray(z, float)
    g = np.empty_like(z)
    for i in range(z.size):
        e = np.zeros_like(z)
        e[i] = h
        g[i] = (fun(z + e) - fun(z - e)) / (2 * h)
    return g


def central_hessian(fun, z, h=1e-4):
    z = np.asarray(z, float)
    n = z.size
    H = np.empty((n, n))
    f0 = fun(z)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h
        H[i, i] = (fun(z + ei) - 2 * f0 + fun(z - ei)) / h**2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h
            H[i, j] = H[j, i] = (fun(z + ei + ej) - fun(z + ei - ej) - fun(z - ei + ej) + fun(z - ei - ej)) / (
                4 * h * h
            )
    return H


def mv_moments_ode(T, lam, x0, t_end):
    """Mean and variance of the optimal mean-variance state from its moment ODE.

    The pair ``(X, D)`` with ``c = D e^{T-t} / (e^{T-t} - 1)`` obeys
    ``dX = c (dt + dB)`` and ``dD = -c dt - D dB``; first and second
    moments close into a linear system.
    """

    def rhs(t, z):
        mx, md, mxx, mxd, mdd = z
        k = 1.0 + 1.0 / np.expm1(T - t)
        return [k * md, -k * md, 2 * k * mxd + k * k * mdd, -k * mxd, (1 - 2 * k) * mdd]

    d0 = np.expm1(T) / lam
    sol = solve_ivp(rhs, (0.0, t_end), [x0, d0, x0 * x0, x0 * d0, d0 * d0], rtol=1e-12, atol=1e-14)
    mx, _, mxx, _, _ = sol.y[:, -1]
    return mx, mxx - mx * mx


def polygon_boundary_points(vertices, per_edge=4000):
    """Dense samples along the closed polyline through ``vertices``."""
    v = np.asarray(vertices, float)
    w = np.roll(v, -1, axis=0)
    s = np.linspace(0.0, 1.0, per_edge, endpoint=False)[:, None, None]
    return (v[None] + s * (w - v)[None]).reshape(-1, 2)


def heat_interval_ends(T, t, x, width=1.0):
    """Closed-form value interval for ``g = sin``, unit diffusion and drift ``a ∈ [-width, width]``."""
    mean = np.sin(x) * np.exp(-0.5 * (T - t))
    return mean - width * (T - t), mean + width * (T - t)
