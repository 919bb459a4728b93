"""Closed forms and Monte Carlo for the linear mean-variance problem.

Dynamics ``dX = a (dt + dB)``; the objective is ``E X_T - (λ/2) Var X_T``.
The optimal state pair is simulated through ``X`` and the gap
``D = Υ₁ - X`` between the first backward component and the state.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ScalarizationBlowup, StepTooLarge
from .reference_sets import MeanVarianceSet, mean_variance_oracle
from .rng import BLOCK, step_normals

__all__ = [
    "MVParams",
    "StaticSolution",
    "static_solution",
    "moving_scalarization",
    "optimal_control",
    "value_process",
    "closed_form_gap",
    "optimal_moments",
    "objective_at",
    "MVPath",
    "MVSimulation",
    "simulate_optimal",
    "mc_objective",
    "time_consistency_check",
    "support_function_defect",
]


@dataclass(frozen=True)
class MVParams:
    x0: float = 0.0
    lam: float = 1.0
    T: float = 1.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"risk aversion must be positive, got {self.lam}")
        if not self.T > 0:
            raise ValueError(f"horizon must be positive, got {self.T}")

    @property
    def eT(self) -> float:
        return float(np.exp(self.T))


@dataclass(frozen=True)
class StaticSolution:
    V0: float
    y1: float
    y2: float


def static_solution(params: MVParams) -> StaticSolution:
    """Optimal value and attained (mean, second moment) of the time-0 problem."""
    g = np.expm1(params.T) / params.lam
    y1 = params.x0 + g
    return StaticSolution(V0=params.x0 + 0.5 * g, y1=y1, y2=y1 * y1 + g / params.lam)


def moving_scalarization(params: MVParams, t, x):
    """Risk weight ``Λ_t`` that makes the dynamic problem time consistent."""
    t = np.asarray(t, float)
    denom = params.eT - params.lam * (np.asarray(x, float) - params.x0)
    if np.any(denom <= 0):
        raise ScalarizationBlowup("state gain reached e^T / λ; the scalarization is undefined")
    return params.lam * np.exp(params.T - t) / denom


def optimal_control(params: MVParams, t, x):
    return -np.asarray(x, float) + params.x0 + params.eT / params.lam


def value_process(params: MVParams, t, x):
    e = np.exp(np.asarray(t, float) - params.T)
    x = np.asarray(x, float)
    return 0.5 * (1 + e) * x + 0.5 * (1 - e) * params.x0 + params.eT / (2 * params.lam) * (1 - e)


def closed_form_gap(params: MVParams, t, x):
    """``Υ₁ - X`` along the optimal trajectory as a function of ``(t, X_t)``."""
    t = np.asarray(t, float)
    return (params.eT - np.exp(t)) / params.lam - (1 - np.exp(t - params.T)) * (np.asarray(x, float) - params.x0)


def optimal_moments(params: MVParams, t):
    """Mean and variance of the optimal state ``X*_t``."""
    t = np.asarray(t, float)
    mean = params.x0 + params.eT / params.lam * (1 - np.exp(-t))
    var = params.eT**2 / params.lam**2 * (np.exp(-t) - np.exp(-2 * t))
    return mean, var


def objective_at(params: MVParams, t) -> float:
    """``E X*_t - (λ/2) Var X*_t``; equals ``V0`` at ``t = T``."""
    mean, var = optimal_moments(params, t)
    return float(mean - 0.5 * params.lam * var)


@dataclass
class MVPath:
    """One recorded optimal path with its scalarization and value."""

    times: np.ndarray
    X: np.ndarray
    upsilon1: np.ndarray
    Lambda: np.ndarray
    V: np.ndarray
    admissible: bool

    def rows(self):
        return np.column_stack([self.times, self.X, self.upsilon1, self.Lambda, self.V])


@dataclass
class MVSimulation:
    params: MVParams
    times: np.ndarray
    terminal_X: np.ndarray
    terminal_gap: np.ndarray
    paths: list[MVPath]
    path_defects: np.ndarray
    positivity_violations: int
    admissibility_violations: int
    seed: int
    summary: dict = field(default_factory=dict)


def _simulate_range(params, times, seed, ids: range, zero_noise, guard, record):
    n = len(ids)
    P_rec = min(record, n)
    x = np.full(n, params.x0)
    gap = np.full(n, np.expm1(params.T) / params.lam)
    top = np.zeros(n)
    bad_gap = np.zeros(n, dtype=bool)
    defect = np.zeros(n)
    dB = np.empty(n)
    S = len(times)
    rec_x = np.empty((S, P_rec))
    rec_gap = np.empty((S, P_rec))
    rec_x[0], rec_gap[0] = x[:P_rec], gap[:P_rec]
    mv = MeanVarianceSet(params.T)
    dts = np.diff(times)
    for k in range(S - 1):
        dt = dts[k]
        if zero_noise:
            dB[:] = 0.0
        else:
            step_normals(seed, k, ids, out=dB)
            dB *= np.sqrt(dt)
        c = (1.0 + mv.phi1(times[k])) * gap
        dx = c * (dt + dB)
        if np.max(np.abs(dx)) > guard * np.sqrt(dt) * (1 + params.eT / params.lam):
            raise StepTooLarge(f"state increment exceeded the guard at t={times[k]:.6g}")
        gap = gap - c * dt - gap * dB
        x = x + dx
        np.maximum(top, x - params.x0, out=top)
        bad_gap |= gap <= 0
        np.maximum(defect, np.abs(gap - closed_form_gap(params, times[k + 1], x)), out=defect)
        rec_x[k + 1], rec_gap[k + 1] = x[:P_rec], gap[:P_rec]
    admissible = top < params.eT / params.lam
    return x, gap, defect, int(bad_gap.sum()), int((~admissible).sum()), rec_x, rec_gap, admissible[:P_rec]


def simulate_optimal(
    params: MVParams,
    dt: float,
    paths: int,
    seed: int,
    *,
    delta_min: float | None = None,
    workers: int = 1,
    zero_noise: bool = False,
    guard: float = 50.0,
    record: int = 10,
) -> MVSimulation:
    """Euler–Maruyama for the optimal state and its backward companion up to ``T - δ_min``.

    Paths are split across workers in whole RNG blocks, so results do not
    depend on ``workers``.  The first ``record`` paths keep full
    trajectories.  For every path the run tracks the largest deviation of
    the simulated gap ``Υ₁ - X`` from its closed form (``path_defects``),
    sign violations of the gap, and breaches of ``X - x0 < e^T / λ``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    delta = 1e-3 * params.T if delta_min is None else delta_min
    end = params.T - delta
    n_steps = int(np.floor(end / dt + 1e-9))
    if n_steps < 1:
        raise ValueError("dt is larger than T - delta_min")
    times = np.linspace(0.0, n_steps * dt, n_steps + 1)

    n_blocks = -(-paths // BLOCK)
    per = -(-n_blocks // max(1, workers))
    ranges = [range(b * BLOCK, min(paths, (b + per) * BLOCK)) for b in range(0, n_blocks, per)]
    rec_left = [max(0, min(record, r.stop) - r.start) for r in ranges]

    def job(i):
        return _simulate_range(params, times, seed, ranges[i], zero_noise, guard, rec_left[i])

    if workers > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, range(len(ranges))))
    else:
        parts = [job(i) for i in range(len(ranges))]

    X = np.concatenate([p[0] for p in parts])
    G = np.concatenate([p[1] for p in parts])
    rec_x = np.concatenate([p[5] for p in parts], axis=1)
    rec_gap = np.concatenate([p[6] for p in parts], axis=1)
    rec_ok = np.concatenate([p[7] for p in parts])
    recorded = []
    for j in range(rec_x.shape[1]):
        xs, gs = rec_x[:, j], rec_gap[:, j]
        try:
            lam_path = moving_scalarization(params, times, xs)
        except ScalarizationBlowup:
            lam_path = np.full_like(xs, np.nan)
        recorded.append(MVPath(times, xs, xs + gs, lam_path, value_process(params, times, xs), bool(rec_ok[j])))
    sim = MVSimulation(
        params=params,
        times=times,
        terminal_X=X,
        terminal_gap=G,
        paths=recorded,
        path_defects=np.concatenate([p[2] for p in parts]),
        positivity_violations=sum(p[3] for p in parts),
        admissibility_violations=sum(p[4] for p in parts),
        seed=int(seed),
    )
    sim.summary = {"dt": dt, "steps": n_steps, "paths": paths, "seed": int(seed), "t_end": float(times[-1]),
                   "max_closed_form_defect": float(sim.path_defects.max()),
                   "q99_closed_form_defect": float(np.quantile(sim.path_defects, 0.99)),
                   "median_closed_form_defect": float(np.median(sim.path_defects)),
                   "fraction_defect_above_5dt": float(np.mean(sim.path_defects > 5 * dt)),
                   "positivity_violations": sim.positivity_violations,
                   "admissibility_violations": sim.admissibility_violations}
    sim.summary.update(mc_objective(params, X, float(times[-1])))
    return sim


def mc_objective(params: MVParams, terminal_X: np.ndarray, t_end: float) -> dict:
    """Monte Carlo objective with a delta-method standard error and its z-score.

    The reference is the exact objective of ``X*`` at ``t_end``; the value
    process averaged over paths is reported alongside.
    """
    X = np.asarray(terminal_X, float)
    n = len(X)
    mu = X.mean()
    var = X.var(ddof=1)
    estimate = mu - 0.5 * params.lam * var
    psi = X - 0.5 * params.lam * (X - mu) ** 2
    se = psi.std(ddof=1) / np.sqrt(n)
    target = objective_at(params, t_end)
    return {
        "V0": static_solution(params).V0,
        "mc_objective": float(estimate),
        "standard_error": float(se),
        "target_objective": target,
        "z_score": float((estimate - target) / se) if se > 0 else 0.0,
        "mean_value_process": float(np.mean(value_process(params, t_end, X))),
        "mc_mean": float(mu),
        "mc_variance": float(var),
    }


def _angle(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    cross = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
    dot = np.sum(u * v, axis=1)
    return np.arctan2(np.abs(cross), np.abs(dot))


def time_consistency_check(params: MVParams, t, x, y_tilde=None) -> np.ndarray:
    """Angle between ``(1, -Λ_t/2)`` and the transformed-set normal, up to sign.

    ``y_tilde`` defaults to the boundary point reached by the optimal path,
    ``(x + gap, φ₁ gap²)``.  The normal is the oracle's ``∇_y r`` at
    ``y_tilde``, so off-boundary inputs are compared against the normal of
    their nearest boundary point.
    """
    t = np.atleast_1d(np.asarray(t, float))
    x = np.broadcast_to(np.asarray(x, float), t.shape)
    mv = MeanVarianceSet(params.T)
    if y_tilde is None:
        gap = closed_form_gap(params, t, x)
        y_tilde = np.column_stack([x + gap, mv.phi1(t) * gap**2])
    y_tilde = np.atleast_2d(np.asarray(y_tilde, float))
    oracle = mean_variance_oracle(params.T, delta_min=min(1e-3 * params.T, params.T - float(np.max(t))))
    nrm = oracle.grad_y(t, x[:, None], y_tilde)
    lam_t = moving_scalarization(params, t, x)
    direction = np.column_stack([np.ones_like(t), -0.5 * lam_t])
    return _angle(direction, nrm)


def support_function_defect(params: MVParams, t: float, x: float, *, half_width: float = 20.0,
                            points: int = 200_001) -> float:
    """Gap between ``y1 - (Λ/2) ỹ2`` at the optimal boundary point and its grid maximum over the boundary."""
    mv = MeanVarianceSet(params.T)
    lam_t = float(moving_scalarization(params, t, x))
    p1 = float(mv.phi1(t))
    gap = float(closed_form_gap(params, t, x))
    at_opt = x + gap - 0.5 * lam_t * p1 * gap**2
    y1 = np.linspace(x - half_width, x + half_width, points)
    grid_max = np.max(y1 - 0.5 * lam_t * p1 * (y1 - x) ** 2)
    return float(abs(at_opt - grid_max))
