"""Optimal feedback, the coupled optimal-state SDE, and a scalar HJB solver."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import CFLViolation, GridTooCoarse, NoConvergence, OracleDerivativeFailure, OutsideTube, StepTooLarge
from .flows import path_batches
from .geometry import SetOracle, as_batch, intrinsic_from_bundle, make_graph_point, project_batch
from .hamiltonian import ControlProblem, drift_package, hamiltonian_sup
from .reference_sets import IntervalSet
from .rng import batch_normals

__all__ = [
    "OptimalFeedback",
    "feedback_from_hamiltonian",
    "VerificationRun",
    "verification_sde_simulate",
    "ScalarHJBSolution",
    "scalar_hjb_solve",
]


@dataclass(frozen=True)
class OptimalFeedback:
    """Batched feedback fields ``I1 -> (N, p)``, ``I2 -> (N, m, d)``, ``I3 -> (N, m)``.

    ``I3_full`` returns the unprojected drift defect ``-(∂_t V + h_V)``.
    """

    I1: Callable
    I2: Callable
    I3: Callable
    I3_full: Callable
    source: str


def feedback_from_hamiltonian(problem: ControlProblem, oracle: SetOracle, *, use_closed_form: bool = True
                              ) -> OptimalFeedback:
    """Feedback fields from the Hamiltonian argmax at (projected) boundary points.

    With a closed-form maximizer the fields are evaluated in batch; otherwise
    the numerical maximizer is run point by point.
    """
    closed = use_closed_form and problem.closed_form is not None

    def argmax(t, x, y):
        t, x, y, _ = as_batch(t, x, y, oracle.d, oracle.m)
        intr = intrinsic_from_bundle(oracle.bundle(t, x, y))
        if closed:
            a, z = problem.closed_form(t, x, y, intr)
            return np.asarray(a, float), np.asarray(z, float), intr
        a_list, z_list = [], []
        for i in range(len(t)):
            pt = make_graph_point(oracle, t[i], x[i], y[i], check=False)
            hv = hamiltonian_sup(problem, oracle, pt, use_closed_form=False)
            a_list.append(hv.a_star)
            z_list.append(hv.zeta_star)
        return np.array(a_list), np.array(z_list), intr

    def defect(t, x, y):
        t, x, y, _ = as_batch(t, x, y, oracle.d, oracle.m)
        a, z, intr = argmax(t, x, y)
        h0, fv, _, _, _ = drift_package(problem, intr, t, x, y, a, z)
        return -(intr.dt_V + h0 + fv), intr.normal

    def I3(t, x, y):
        full, n = defect(t, x, y)
        return full - np.sum(full * n, axis=1, keepdims=True) * n

    return OptimalFeedback(
        I1=lambda t, x, y: argmax(t, x, y)[0],
        I2=lambda t, x, y: argmax(t, x, y)[1],
        I3=I3,
        I3_full=lambda t, x, y: defect(t, x, y)[0],
        source="closed_form_tag" if closed else "hamiltonian_argmax",
    )


@dataclass
class VerificationRun:
    """Trajectories ``X (S, P, d)``, ``Y (S, P, m)`` and residuals ``(S, P)``."""

    times: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    residuals: np.ndarray
    max_abs_residual: float
    form: str
    seed: int
    max_form_gap: float = float("nan")
    terminal_mismatch: float = float("nan")
    summary: dict = field(default_factory=dict)


def _verification_batch(problem, oracle, feedback_closed, x0, y0, times, seed, ids, form, guard, zero_noise,
                        compare_forms, record_idx):
    P = len(ids)
    d, m = oracle.d, oracle.m
    n_steps = len(times) - 1
    dts = np.diff(times)
    if zero_noise:
        dB = np.zeros((P, n_steps, d))
    else:
        dB = batch_normals(seed, ids, n_steps, d) * np.sqrt(dts)[None, :, None]
    X = np.broadcast_to(x0, (P, d)).astype(float).copy()
    Y = np.broadcast_to(y0, (P, m)).astype(float).copy()
    rec = {int(i): j for j, i in enumerate(record_idx)}
    S = len(record_idx)
    Xs, Ys, Rs = np.empty((S, P, d)), np.empty((S, P, m)), np.empty((S, P))
    r_max = 0.0
    gap = 0.0
    for i in range(n_steps + 1):
        t = times[i]
        tt = np.full(P, t)
        r = oracle.r(tt, X, Y)
        r_max = max(r_max, float(np.max(np.abs(r))))
        if i in rec:
            j = rec[i]
            Xs[j], Ys[j], Rs[j] = X, Y, r
        if i == n_steps:
            break
        try:
            p = project_batch(oracle, tt, X, Y)
        except (OutsideTube, NoConvergence) as exc:
            raise OracleDerivativeFailure(f"projection failed at t={t:.4g}: {exc}") from exc
        intr = intrinsic_from_bundle(oracle.bundle(tt, X, p))
        a, zeta = feedback_closed(tt, X, p, intr)
        h0, fv, zs, b, s = drift_package(problem, intr, tt, X, p, a, zeta)
        drift2 = -fv
        if form == "X*" or compare_forms:
            full = -(intr.dt_V + h0 + fv)
            n = intr.normal
            I3 = full - np.sum(full * n, axis=1, keepdims=True) * n
            drift1 = intr.dt_V + h0 + I3
            if compare_forms:
                gap = max(gap, float(np.max(np.abs(drift1 - drift2))))
        drift = drift1 if form == "X*" else drift2
        dY = drift * dts[i] + np.einsum("nkj,nj->nk", zs, dB[:, i])
        if np.any(np.linalg.norm(dY, axis=1) > guard * np.sqrt(dts[i])):
            raise StepTooLarge(f"|ΔΥ| exceeded {guard:g}·sqrt(dt) at t={t:.4g}")
        X = X + b * dts[i] + np.einsum("nij,nj->ni", s, dB[:, i])
        Y = Y + dY
    return Xs, Ys, Rs, r_max, gap


def verification_sde_simulate(
    problem: ControlProblem,
    oracle: SetOracle,
    feedback: OptimalFeedback | None,
    x0,
    y0,
    times,
    paths: int,
    seed: int,
    *,
    form: str = "X*2",
    workers: int = 1,
    batch: int = 250,
    guard: float = 100.0,
    zero_noise: bool = False,
    compare_forms: bool = False,
    record_every: int = 1,
) -> VerificationRun:
    """Euler–Maruyama for the optimal state and the backward value on the boundary.

    ``form="X*2"`` uses drift ``-f``; ``form="X*"`` uses ``∂_t V + h0 + I3``.
    With ``compare_forms`` both drifts are computed each step and their
    largest difference is reported.  Coefficients are evaluated at the
    projection of ``Υ`` onto the boundary.
    """
    if form not in ("X*", "X*2"):
        raise ValueError("form must be 'X*' or 'X*2'")
    x0 = np.atleast_1d(np.asarray(x0, float))
    y0 = np.atleast_1d(np.asarray(y0, float))
    times = np.asarray(times, float)
    n_steps = len(times) - 1
    record_idx = np.unique(np.r_[np.arange(0, n_steps + 1, record_every), n_steps])

    if feedback is None or feedback.source == "closed_form_tag":
        if problem.closed_form is None:
            raise ValueError("batched simulation needs a closed-form maximizer or explicit feedback")
        closed = problem.closed_form
    else:
        def closed(t, x, y, intr):
            return feedback.I1(t, x, y), feedback.I2(t, x, y)

    def job(ids):
        return _verification_batch(problem, oracle, closed, x0, y0, times, seed, ids, form, guard, zero_noise,
                                   compare_forms, record_idx)

    chunks = path_batches(paths, batch)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, chunks))
    else:
        parts = [job(c) for c in chunks]
    Xs = np.concatenate([p[0] for p in parts], axis=1)
    Ys = np.concatenate([p[1] for p in parts], axis=1)
    Rs = np.concatenate([p[2] for p in parts], axis=1)
    r_max = max(p[3] for p in parts)
    gap = max(p[4] for p in parts) if compare_forms else float("nan")
    terminal = float("nan")
    if problem.g is not None and oracle.horizon is None:
        terminal = float(np.max(np.linalg.norm(Ys[-1] - problem.g(Xs[-1]), axis=1)))
    summary = {
        "paths": paths,
        "steps": n_steps,
        "form": form,
        "max_abs_residual": r_max,
        "final_residual_q99": float(np.quantile(np.abs(Rs[-1]), 0.99)),
        "max_form_gap": gap,
        "seed": int(seed),
    }
    return VerificationRun(times[record_idx], Xs, Ys, Rs, r_max, form, int(seed), gap, terminal, summary)


# ---------------------------------------------------------------------------
# scalar HJB
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarHJBSolution:
    """Mesh solution of the lower and upper scalar HJB equations.

    ``lower`` and ``upper`` have shape ``(len(times), len(x))``.
    """

    x: np.ndarray
    times: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    dt: float
    degenerate: bool

    def interval(self) -> IntervalSet:
        lo = RegularGridInterpolator((self.times, self.x), self.lower)
        hi = RegularGridInterpolator((self.times, self.x), self.upper)
        return IntervalSet(
            lower=lambda t, x: lo(np.column_stack([t, x[:, 0]])),
            upper=lambda t, x: hi(np.column_stack([t, x[:, 0]])),
            name="scalar-hjb",
        )


def scalar_hjb_solve(
    problem: ControlProblem,
    x_min: float,
    x_max: float,
    dx: float,
    T: float,
    *,
    dt: float | None = None,
    cfl: float = 0.9,
    save_every: int | None = None,
    degenerate_tol: float = 1e-12,
) -> ScalarHJBSolution:
    """Explicit monotone upwind scheme for ``v_t + opt_a[b v_x + ½σ² v_xx + f] = 0``, ``v(T) = g``.

    ``opt`` is ``inf`` for the lower and ``sup`` for the upper endpoint and
    runs over the control grid.  Ends use linear extrapolation, so errors
    are measured away from them.
    """
    if problem.m != 1 or problem.d != 1:
        raise ValueError("scalar_hjb_solve needs d = m = 1")
    if dx <= 0 or (x_max - x_min) / dx < 8:
        raise GridTooCoarse(f"dx = {dx} gives fewer than 8 cells on [{x_min}, {x_max}]")
    if problem.g is None:
        raise ValueError("terminal function g is required")
    nx = int(round((x_max - x_min) / dx)) + 1
    x = np.linspace(x_min, x_max, nx)
    dx = x[1] - x[0]
    A = problem.control_set.grid()
    K = len(A)
    xx = np.broadcast_to(x[:, None], (nx, 1))

    def coeffs(t):
        tk = np.full(nx * K, t)
        xk = np.repeat(xx, K, axis=0)
        ak = np.tile(A, (nx, 1))
        b = problem.b(tk, xk, ak)[:, 0].reshape(nx, K)
        s = problem.sigma(tk, xk, ak)[:, 0, 0].reshape(nx, K)
        return tk, xk, ak, b, s

    _, _, _, b0, s0 = coeffs(0.0)
    speed = np.max(s0**2) / dx**2 + np.max(np.abs(b0)) / dx
    dt_max = 1.0 / speed if speed > 0 else T
    if dt is None:
        dt = cfl * dt_max
    elif dt > dt_max * (1 + 1e-12):
        raise CFLViolation(f"dt = {dt:g} exceeds the monotonicity limit {dt_max:g}")
    n_steps = max(1, int(np.ceil(T / dt)))
    dt = T / n_steps
    save_every = save_every or max(1, n_steps // 100)

    g = problem.g(xx)[:, 0]
    lower, upper = g.copy(), g.copy()
    saved_t, saved_lo, saved_hi = [T], [g.copy()], [g.copy()]

    def advance(v, t, pick):
        tk, xk, ak, b, s = coeffs(t)
        vp = np.empty(nx + 2)
        vp[1:-1] = v
        vp[0] = 2 * v[0] - v[1]
        vp[-1] = 2 * v[-1] - v[-2]
        fwd = (vp[2:] - vp[1:-1]) / dx
        bwd = (vp[1:-1] - vp[:-2]) / dx
        cen = 0.5 * (fwd + bwd)
        lap = (vp[2:] - 2 * vp[1:-1] + vp[:-2]) / dx**2
        grad = np.where(b >= 0, fwd[:, None], bwd[:, None])
        z = (cen[:, None] * s).reshape(-1, 1, 1)
        f = problem.f(tk, xk, np.repeat(v, K)[:, None], z, ak)[:, 0].reshape(nx, K)
        ham = b * grad + 0.5 * s**2 * lap[:, None] + f
        return v + dt * pick(ham, axis=1)

    for k in range(n_steps):
        t = T - k * dt
        lower = advance(lower, t, np.min)
        upper = advance(upper, t, np.max)
        if (k + 1) % save_every == 0 or k + 1 == n_steps:
            saved_t.append(T - (k + 1) * dt)
            saved_lo.append(lower.copy())
            saved_hi.append(upper.copy())
    order = np.argsort(saved_t)
    times = np.asarray(saved_t)[order]
    lo_arr = np.asarray(saved_lo)[order]
    hi_arr = np.asarray(saved_hi)[order]
    degenerate = bool(np.max(hi_arr - lo_arr) <= degenerate_tol)
    return ScalarHJBSolution(x, times, lo_arr, hi_arr, dt, degenerate)
