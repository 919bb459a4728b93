"""Deterministic geodesic flow and the stochastic boundary (Itô) flow."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    CompetitorOffBoundary,
    LeftTube,
    NoConvergence,
    OracleDerivativeFailure,
    OutsideTube,
    StepTooLarge,
)
from .geometry import SetOracle, as_batch, intrinsic_from_bundle, project_batch
from .rng import batch_normals

__all__ = [
    "GeodesicTrajectory",
    "geodesic_ode",
    "geodesic_length",
    "curve_length",
    "length_comparison",
    "DiffusionSpec",
    "TangentFieldSpec",
    "ItoFlowResult",
    "ito_flow_simulate",
    "surjectivity_check",
    "flow_coefficients",
    "path_batches",
]


# ---------------------------------------------------------------------------
# geodesic ODE  Υ'(x) = -∇_x r n  (scalar x)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeodesicTrajectory:
    xs: np.ndarray
    ys: np.ndarray
    residuals: np.ndarray


def _geodesic_rhs(oracle: SetOracle, t: float, x: float, y: np.ndarray) -> np.ndarray:
    b = oracle.bundle(t, np.array([x]), y)
    g = b.grad_y[0]
    return -b.grad_x[0, 0] * g / np.linalg.norm(g)


def geodesic_ode(oracle: SetOracle, x0: float, y0, x_end: float, step: float, *, t: float = 0.0,
                 tol: float | None = None) -> GeodesicTrajectory:
    """Integrate the boundary geodesic from ``(x0, y0)`` to ``x_end`` with classical RK4."""
    if oracle.d != 1:
        raise ValueError("the geodesic flow is defined for scalar x")
    y = np.asarray(y0, dtype=float).copy()
    n = max(1, int(round(abs(x_end - x0) / step)))
    h = (x_end - x0) / n
    xs = x0 + h * np.arange(n + 1)
    ys = np.empty((n + 1, y.size))
    ys[0] = y
    for i in range(n):
        x = xs[i]
        k1 = _geodesic_rhs(oracle, t, x, y)
        k2 = _geodesic_rhs(oracle, t, x + h / 2, y + h / 2 * k1)
        k3 = _geodesic_rhs(oracle, t, x + h / 2, y + h / 2 * k2)
        k4 = _geodesic_rhs(oracle, t, x + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        ys[i + 1] = y
    res = oracle.r(np.full(n + 1, t), xs[:, None], ys)
    if np.any(np.abs(res) >= oracle.epsilon_band):
        raise LeftTube(f"geodesic left the band: max |r| = {np.max(np.abs(res)):.3g}")
    if tol is not None and np.max(np.abs(res)) > tol:
        raise LeftTube(f"geodesic drifted off the boundary: max |r| = {np.max(np.abs(res)):.3g} > {tol:g}")
    return GeodesicTrajectory(xs, ys, res)


def curve_length(points: np.ndarray) -> float:
    """Polygonal length of a sampled curve ``(k, m)``."""
    return float(np.sum(np.linalg.norm(np.diff(points, axis=0), axis=1)))


def geodesic_length(trajectory: GeodesicTrajectory) -> float:
    return curve_length(trajectory.ys)


def length_comparison(
    oracle: SetOracle,
    x0: float,
    y0,
    competitor: Callable[[np.ndarray], np.ndarray],
    dx: float,
    *,
    t: float = 0.0,
    samples: int = 2001,
    tol: float = 1e-8,
) -> float:
    """``(L_geodesic - L_competitor) / dx`` on ``[x0, x0 + dx]``.

    ``competitor`` maps an array of ``x`` values to boundary points ``(k, m)``.
    """
    xs = np.linspace(x0, x0 + dx, samples)
    pts = np.asarray(competitor(xs), dtype=float)
    y0 = np.asarray(y0, dtype=float)
    if np.max(np.abs(pts[0] - y0)) > tol:
        raise CompetitorOffBoundary("competitor does not start at y0")
    res = oracle.r(np.full(samples, t), xs[:, None], pts)
    if np.max(np.abs(res)) > max(tol, oracle.graph_tol):
        raise CompetitorOffBoundary(f"competitor leaves the boundary: max |r| = {np.max(np.abs(res)):.3g}")
    geo = geodesic_ode(oracle, x0, y0, x0 + dx, dx / (samples - 1), t=t)
    return (geodesic_length(geo) - curve_length(pts)) / dx


# ---------------------------------------------------------------------------
# stochastic boundary flow
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiffusionSpec:
    """``dX = b(t, X) dt + sigma(t, X) dB`` with batched ``b -> (N, d)``, ``sigma -> (N, d, d)``."""

    b: Callable[[np.ndarray, np.ndarray], np.ndarray]
    sigma: Callable[[np.ndarray, np.ndarray], np.ndarray]
    x0: np.ndarray

    @classmethod
    def brownian(cls, d: int = 1, x0=None, scale: float = 1.0) -> "DiffusionSpec":
        x0 = np.zeros(d) if x0 is None else np.atleast_1d(np.asarray(x0, float))
        return cls(
            b=lambda t, x: np.zeros_like(x),
            sigma=lambda t, x: scale * np.broadcast_to(np.eye(d), (x.shape[0], d, d)).copy(),
            x0=x0,
        )


@dataclass(frozen=True)
class TangentFieldSpec:
    """Driving fields ``xi -> (N, m)`` and ``zeta -> (N, m, d)`` of the boundary flow.

    Both are evaluated at the projected point, so fields built from the
    normal there are exactly tangential or signed as the regime requires.
    """

    xi: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray] | None = None
    zeta: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray] | None = None
    regime: str = "tangential"
    lipschitz_y: float = 1.0

    def __post_init__(self):
        if self.regime not in ("tangential", "inward", "outward"):
            raise ValueError(f"unknown regime {self.regime!r}")


@dataclass
class ItoFlowResult:
    """Output of :func:`ito_flow_simulate`.

    ``X`` has shape ``(S, P, d)`` and ``Y`` has ``(S, P, K, m)`` for ``S``
    recorded times, ``P`` paths and ``K`` initial points; ``residuals`` is
    ``(S, P, K)``.  Only every ``record_every``-th step is stored, but the
    residual extremes are tracked at every step.
    """

    times: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    residuals: np.ndarray
    max_abs_residual: float
    mean_residual: np.ndarray
    exited: np.ndarray
    sign_violations: int
    seed: int
    regime: str
    summary: dict = field(default_factory=dict)


def flow_coefficients(oracle: SetOracle, t, x, p, b, sigma, xi, zeta):
    """Drift ``L - K + xi`` and diffusion ``∂_x V sigma + zeta`` at boundary points ``p``."""
    try:
        intr = intrinsic_from_bundle(oracle.bundle(t, x, p))
    except Exception as exc:  # surfaced with context
        raise OracleDerivativeFailure(f"{oracle.name}: {exc}") from exc
    n = intr.normal
    a = np.einsum("nij,nkj->nik", sigma, sigma)
    drift = intr.dt_V + np.einsum("nki,ni->nk", intr.dx_V, b) + 0.5 * np.einsum("nkij,nij->nk", intr.dxx_V, a)
    diff = np.einsum("nki,nij->nkj", intr.dx_V, sigma)
    if zeta is not None:
        corr = np.einsum("nkj,nki,nij->n", zeta, intr.dx_n, sigma) + 0.5 * np.einsum(
            "nkj,nkl,nlj->n", zeta, intr.dy_n, zeta
        )
        drift = drift - corr[:, None] * n
        diff = diff + zeta
    if xi is not None:
        drift = drift + xi
    return drift, diff


def path_batches(paths: int, batch: int) -> list[range]:
    return [range(s, min(paths, s + batch)) for s in range(0, paths, batch)]


def _run_batch(oracle, diffusion, fields, y0, times, seed, path_ids, guard, record_idx, noise_refine):
    P = len(path_ids)
    K, m = y0.shape
    d = oracle.d
    n_steps = len(times) - 1
    dB = batch_normals(seed, path_ids, n_steps * noise_refine, d)
    if noise_refine > 1:
        dB = dB.reshape(P, n_steps, noise_refine, d).sum(axis=2)
    dts = np.diff(times)
    dB *= np.sqrt(dts / noise_refine)[None, :, None]
    X =np.broadcast_to(diffusion.x0, (P, d)).astype(float).copy()
    Y = np.broadcast_to(y0, (P, K, m)).astype(float).copy()
    alive = np.ones((P, K), dtype=bool)
    S = len(record_idx)
    rec = {int(i): j for j, i in enumerate(record_idx)}
    Xs = np.empty((S, P, d))
    Ys = np.empty((S, P, K, m))
    Rs = np.empty((S, P, K))
    r_sum = np.zeros(n_steps + 1)
    r_max = 0.0
    sign0 = None
    violations = np.zeros((P, K), dtype=bool)
    band = oracle.epsilon_band
    for i in range(n_steps + 1):
        t = times[i]
        xf = np.repeat(X, K, axis=0)
        yf = Y.reshape(P * K, m)
        r = oracle.r(np.full(P * K, t), xf, yf).reshape(P, K)
        if sign0 is None:
            sign0 = np.sign(r)
        if fields.regime != "tangential":
            violations |= alive & (np.sign(r) != sign0)
        out = alive & (np.abs(r) >= band)
        alive &= ~out
        r_max = max(r_max, float(np.max(np.abs(np.where(alive, r, 0.0)))))
        r_sum[i] = float(np.sum(np.where(alive, r, 0.0)))
        if i in rec:
            j = rec[i]
            Xs[j], Ys[j], Rs[j] = X, Y, r
        if i == n_steps:
            break
        dt = dts[i]
        live = alive.reshape(-1)
        idx = np.flatnonzero(live)
        if idx.size == 0:
            break
        tt = np.full(idx.size, t)
        try:
            p = project_batch(oracle, tt, xf[idx], yf[idx])
        except (OutsideTube, NoConvergence) as exc:
            raise OracleDerivativeFailure(f"projection failed at t={t:.4g}: {exc}") from exc
        xa = xf[idx]
        b = diffusion.b(tt, xa)
        sig = diffusion.sigma(tt, xa)
        xi = fields.xi(tt, xa, p) if fields.xi is not None else None
        zeta = fields.zeta(tt, xa, p) if fields.zeta is not None else None
        drift, diff = flow_coefficients(oracle, tt, xa, p, b, sig, xi, zeta)
        inc = np.repeat(dB[:, i, :], K, axis=0)[idx]
        dY = drift * dt + np.einsum("nkj,nj->nk", diff, inc)
        if np.any(np.linalg.norm(dY, axis=1) > guard * np.sqrt(dt)):
            raise StepTooLarge(f"|ΔΥ| exceeded {guard:g}·sqrt(dt) at t={t:.4g}")
        yflat = Y.reshape(P * K, m)
        yflat[idx] += dY
        Y = yflat.reshape(P, K, m)
        bx = diffusion.b(np.full(P, t), X)
        sx = diffusion.sigma(np.full(P, t), X)
        X = X + bx * dt + np.einsum("nij,nj->ni", sx, dB[:, i, :])
    return Xs, Ys, Rs, r_sum, r_max, ~alive, violations


def ito_flow_simulate(
    oracle: SetOracle,
    diffusion: DiffusionSpec,
    fields: TangentFieldSpec,
    y0,
    times,
    paths: int,
    seed: int,
    *,
    workers: int = 1,
    batch: int = 250,
    guard: float = 100.0,
    record_every: int = 1,
    max_exit_fraction: float = 1e-3,
    noise_refine: int = 1,
) -> ItoFlowResult:
    """Euler–Maruyama simulation of the boundary flow driven by ``(xi, zeta)``.

    ``y0`` is ``(K, m)``: every path carries all ``K`` initial points through
    the same Brownian motion.  Path ``p`` always consumes the normal stream
    keyed by ``(seed, p)``, so results do not depend on ``workers`` or
    ``batch``.  ``noise_refine > 1`` builds each increment from that many
    finer sub-increments, which couples runs at different step sizes.
    """
    y0 = np.atleast_2d(np.asarray(y0, dtype=float))
    times = np.asarray(times, dtype=float)
    n_steps = len(times) - 1
    record_idx = np.unique(np.r_[np.arange(0, n_steps + 1, record_every), n_steps])
    chunks = path_batches(paths, batch)

    def job(ids):
        return _run_batch(oracle, diffusion, fields, y0, times, seed, ids, guard, record_idx, noise_refine)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, chunks))
    else:
        parts = [job(c) for c in chunks]

    Xs = np.concatenate([p[0] for p in parts], axis=1)
    Ys = np.concatenate([p[1] for p in parts], axis=1)
    Rs = np.concatenate([p[2] for p in parts], axis=1)
    r_sum = np.sum([p[3] for p in parts], axis=0)
    r_max = max(p[4] for p in parts)
    exited = np.concatenate([p[5] for p in parts], axis=0)
    viol = np.concatenate([p[6] for p in parts], axis=0)
    total = paths * y0.shape[0]
    mean_r = r_sum / total
    frac = float(np.mean(exited))
    if fields.regime == "tangential" and frac > max_exit_fraction:
        raise LeftTube(f"{frac:.2%} of trajectories left the band (limit {max_exit_fraction:.2%})")
    summary = {
        "paths": paths,
        "initial_points": int(y0.shape[0]),
        "steps": n_steps,
        "max_abs_residual": r_max,
        "max_abs_mean_residual": float(np.max(np.abs(mean_r))),
        "final_residual_q50": float(np.quantile(np.abs(Rs[-1]), 0.5)),
        "final_residual_q99": float(np.quantile(np.abs(Rs[-1]), 0.99)),
        "exit_fraction": frac,
        "sign_violations": int(np.sum(viol)),
        "seed": int(seed),
    }
    return ItoFlowResult(
        times=times[record_idx],
        X=Xs,
        Y=Ys,
        residuals=Rs,
        max_abs_residual=r_max,
        mean_residual=mean_r,
        exited=exited,
        sign_violations=int(np.sum(viol)),
        seed=int(seed),
        regime=fields.regime,
        summary=summary,
    )


def surjectivity_check(result: ItoFlowResult, oracle: SetOracle, t_index: int = -1, *, path: int = 0,
                       reference: int = 2000) -> float:
    """One-sided defect ``sup_{q ∈ ∂V(t, X_t)} dist(q, flowed cloud)`` for one path.

    Reference boundary points come from projecting a ring of seeds around
    the flowed cloud's centroid onto the boundary.
    """
    from scipy.spatial import cKDTree

    t = float(result.times[t_index])
    x = result.X[t_index, path]
    cloud = result.Y[t_index, path]
    if oracle.m != 2:
        raise ValueError("surjectivity_check samples planar boundaries")
    ref = _planar_boundary(oracle, t, x, np.mean(cloud, axis=0), reference)
    dist, _ = cKDTree(cloud).query(ref)
    return float(np.max(dist))


def _planar_boundary(oracle: SetOracle, t: float, x, center, count: int) -> np.ndarray:
    """Boundary points along ``count`` rays from an interior ``center`` (bisection on r)."""
    th = 2 * np.pi * np.arange(count) / count
    dirs = np.column_stack([np.cos(th), np.sin(th)])
    tt, xx, _, _ = as_batch(t, x, np.zeros((count, 2)), oracle.d, 2)
    lo = np.zeros(count)
    hi = np.full(count, 1e-3)
    for _ in range(60):
        outside = oracle.r(tt, xx, center + hi[:, None] * dirs) > 0
        if np.all(outside):
            break
        hi = np.where(outside, hi, 2 * hi)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        inside = oracle.r(tt, xx, center + mid[:, None] * dirs) <= 0
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return center + (0.5 * (lo + hi))[:, None] * dirs
