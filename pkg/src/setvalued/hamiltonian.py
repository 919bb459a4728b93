"""The set-valued Hamiltonian and HJB residuals.

The supremum over tangential fields is taken in tangent coordinates: with
an orthonormal tangent basis ``T`` (``m x (m-1)``) every admissible field is
``zeta = T C`` for ``C`` of shape ``(m-1, d)``.  The objective is then

    J(a, C) = c_b·b + ½ tr(σᵀ S σ) - <G, C> - ½ Σ_j C_jᵀ Q C_j + ν·f(Z σ + T C, a)

and the two formulations of the HJB operator differ only in where the
coefficients ``(ν, c_b, S, G, Q, Z)`` come from: intrinsic derivatives of the
boundary (normal form) or raw derivatives of the signed distance (distance
form).  Both are assembled independently below.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DegenerateYGradient, EmptyControlGrid, IndefiniteQuadratic, NonTangentialZeta
from .geometry import (
    DerivativeBundle,
    GraphPoint,
    IntrinsicDerivatives,
    SetOracle,
    intrinsic_from_bundle,
    make_graph_point,
)
from .reference_sets import IntervalSet

__all__ = [
    "ControlSet",
    "ControlProblem",
    "HamiltonianValue",
    "HJBResidual",
    "correction_K",
    "hamiltonian_sup",
    "hjb_residual",
    "set_heat_residual",
    "scalar_reduction_residual",
    "hat_equation_residual",
    "check_z_affinity",
    "drift_package",
]


# ---------------------------------------------------------------------------
# problem description
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ControlSet:
    """Box, ball or unconstrained control set in ``R^dim``.

    ``lower``/``upper`` bound the box; for a free set they only bound the
    seeding grid.  ``resolution`` is the number of grid points per dimension.
    """

    kind: str = "box"
    dim: int = 1
    lower: tuple = (-1.0,)
    upper: tuple = (1.0,)
    radius: float = 1.0
    center: tuple | None = None
    resolution: int = 64

    def __post_init__(self):
        if self.kind not in ("box", "ball", "free"):
            raise ValueError(f"unknown control set kind {self.kind!r}")

    def _bounds(self):
        if self.kind == "ball":
            c = np.zeros(self.dim) if self.center is None else np.asarray(self.center, float)
            return c - self.radius, c + self.radius
        lo = np.broadcast_to(np.asarray(self.lower, float), (self.dim,))
        hi = np.broadcast_to(np.asarray(self.upper, float), (self.dim,))
        return lo, hi

    def grid(self) -> np.ndarray:
        """Grid points ``(K, dim)`` in lexicographic (C) order."""
        if self.resolution < 1:
            raise EmptyControlGrid("resolution must be positive")
        lo, hi = self._bounds()
        axes = [np.linspace(lo[i], hi[i], self.resolution) for i in range(self.dim)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        if self.kind == "ball":
            c = 0.5 * (lo + hi)
            pts = pts[np.linalg.norm(pts - c, axis=1) <= self.radius * (1 + 1e-12)]
        if len(pts) == 0:
            raise EmptyControlGrid(f"{self.kind} control grid is empty")
        return pts

    def project(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, float)
        if self.kind == "free":
            return a
        lo, hi = self._bounds()
        if self.kind == "box":
            return np.clip(a, lo, hi)
        c = 0.5 * (lo + hi)
        v = a - c
        nv = np.linalg.norm(v, axis=-1, keepdims=True)
        return np.where(nv > self.radius, c + v * (self.radius / np.maximum(nv, 1e-300)), a)


ClosedForm = Callable[[np.ndarray, np.ndarray, np.ndarray, IntrinsicDerivatives], tuple]


@dataclass(frozen=True)
class ControlProblem:
    """Coefficients of the controlled forward-backward system (all batched).

    ``b(t, x, a) -> (N, d)``, ``sigma(t, x, a) -> (N, d, d)``,
    ``f(t, x, y, z, a) -> (N, m)`` with ``z (N, m, d)``, ``g(x) -> (N, m)``.
    ``closed_form(t, x, y, intr)`` optionally returns the exact maximizer
    ``(a* (N, p), zeta* (N, m, d))`` at a batch of graph points from their
    (batched) intrinsic derivatives.
    """

    d: int
    m: int
    b: Callable
    sigma: Callable
    f: Callable
    control_set: ControlSet
    g: Callable | None = None
    z_affine: bool = True
    closed_form: ClosedForm | None = None
    name: str = "problem"


def check_z_affinity(problem: ControlProblem, samples: int = 20, seed: int = 0, tol: float = 1e-9) -> bool:
    """Random three-point collinearity test of ``z -> f(t, x, y, z, a)``."""
    rng = np.random.default_rng(seed)
    d, m = problem.d, problem.m
    t = rng.uniform(0, 0.5, samples)
    x = rng.normal(size=(samples, d))
    y = rng.normal(size=(samples, m))
    a = problem.control_set.project(rng.normal(size=(samples, problem.control_set.dim)))
    z0 = rng.normal(size=(samples, m, d))
    z1 = rng.normal(size=(samples, m, d))
    s = rng.uniform(-1, 2, samples)[:, None, None]
    mid = problem.f(t, x, y, (1 - s) * z0 + s * z1, a)
    lin = (1 - s[:, :, 0]) * problem.f(t, x, y, z0, a) + s[:, :, 0] * problem.f(t, x, y, z1, a)
    scale = 1 + np.max(np.abs(lin))
    return bool(np.max(np.abs(mid - lin)) <= tol * scale)


@dataclass(frozen=True)
class HamiltonianValue:
    value: float
    a_star: np.ndarray
    zeta_star: np.ndarray
    inner_status: str
    lambda_min: float
    tangent_coords: np.ndarray


@dataclass(frozen=True)
class HJBResidual:
    n_form: float
    r_form: float
    lambda_min: float
    cross_tol: float
    a_star: np.ndarray
    zeta_star: np.ndarray

    @property
    def consistent(self) -> bool:
        return abs(self.n_form - self.r_form) <= self.cross_tol


# ---------------------------------------------------------------------------
# the curvature correction
# ---------------------------------------------------------------------------


def correction_K(point: GraphPoint, derivs: IntrinsicDerivatives, sigma_val, zeta, *, check: bool = True,
                 tol: float = 1e-8) -> np.ndarray:
    """``tr(ζᵀ ∂_x n σ + ½ ζᵀ ∂_y n ζ) n`` at a single graph point."""
    zeta = np.atleast_2d(np.asarray(zeta, float)).reshape(point.normal.size, -1)
    sigma_val = np.atleast_2d(np.asarray(sigma_val, float))
    if check and np.max(np.abs(point.normal @ zeta), initial=0.0) > tol:
        raise NonTangentialZeta(f"|nᵀζ| = {np.max(np.abs(point.normal @ zeta)):.3g}")
    scal = np.trace(zeta.T @ derivs.dx_n @ sigma_val) + 0.5 * np.trace(zeta.T @ derivs.dy_n @ zeta)
    return scal * point.normal


# ---------------------------------------------------------------------------
# objective packs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Pack:
    nu: np.ndarray  # (m,)
    c_b: np.ndarray  # (d,)
    S: np.ndarray  # (d, d)
    dxn: np.ndarray  # (m, d)
    Q: np.ndarray  # (m-1, m-1)
    Z: np.ndarray  # (m, d)
    T: np.ndarray  # (m, m-1)


def _normal_pack(intr: IntrinsicDerivatives, T: np.ndarray) -> _Pack:
    n = intr.normal
    Q = T.T @ intr.dy_n @ T
    return _Pack(n, n @ intr.dx_V, np.einsum("k,kij->ij", n, intr.dxx_V), intr.dx_n, 0.5 * (Q + Q.T), intr.dx_V, T)


def _distance_pack(b: DerivativeBundle, T: np.ndarray) -> _Pack:
    gy = b.grad_y[0]
    gx = b.grad_x[0]
    hyy = 0.5 * (b.hess_yy[0] + b.hess_yy[0].T)
    Q = T.T @ hyy @ T
    return _Pack(gy, -gx, -b.hess_xx[0], b.hess_xy[0].T, 0.5 * (Q + Q.T), -np.outer(gy, gx), T)


class _Objective:
    """``J(a, C)`` at one graph point, vectorized over a batch of controls."""

    def __init__(self, problem: ControlProblem, pack: _Pack, t: float, x: np.ndarray, y: np.ndarray):
        self.p = problem
        self.k = pack
        self.t, self.x, self.y = t, x, y
        self.q = (problem.m - 1) * problem.d

    def coeffs(self, a: np.ndarray):
        K = len(a)
        t = np.full(K, self.t)
        x = np.broadcast_to(self.x, (K, self.p.d))
        b = self.p.b(t, x, a)
        s = self.p.sigma(t, x, a)
        k = self.k
        base = b @ k.c_b + 0.5 * np.einsum("kia,ij,kja->k", s, k.S, s)
        G = np.einsum("mr,md,kde->kre", k.T, k.dxn, s)
        Zs = np.einsum("md,kde->kme", k.Z, s)
        return base, G, Zs

    def f_nu(self, a, z):
        K = len(a)
        t = np.full(K, self.t)
        x = np.broadcast_to(self.x, (K, self.p.d))
        y = np.broadcast_to(self.y, (K, self.p.m))
        return self.p.f(t, x, y, z, a) @ self.k.nu

    def value(self, a, C, coeffs=None):
        base, G, Zs = self.coeffs(a) if coeffs is None else coeffs
        zeta = np.einsum("mr,krd->kmd", self.k.T, C)
        quad = np.einsum("krj,rs,ksj->k", C, self.k.Q, C)
        return base - np.sum(G * C, axis=(1, 2)) - 0.5 * quad + self.f_nu(a, Zs + zeta)

    # -- inner maximization over tangent coordinates ------------------------

    def _linear_coeffs(self, a, Zs, C0, step):
        """Central-difference gradient of ``ν·f(Zσ + T C)`` in ``C`` at ``C0``."""
        K = len(a)
        r_dim = self.p.m - 1
        ell = np.zeros((K, r_dim, self.p.d))
        for r in range(r_dim):
            for j in range(self.p.d):
                E = np.zeros((r_dim, self.p.d))
                E[r, j] = step
                zp = Zs + np.einsum("mr,rd->md", self.k.T, E)[None] + np.einsum("mr,krd->kmd", self.k.T, C0)
                zm = Zs - np.einsum("mr,rd->md", self.k.T, E)[None] + np.einsum("mr,krd->kmd", self.k.T, C0)
                ell[:, r, j] = (self.f_nu(a, zp) - self.f_nu(a, zm)) / (2 * step)
        return ell

    def inner(self, a: np.ndarray):
        """``(value, C*, status)`` of ``sup_C J(a, C)`` for each control."""
        K = len(a)
        co = self.coeffs(a)
        base, G, Zs = co
        r_dim = self.p.m - 1
        if r_dim == 0:
            C = np.zeros((K, 0, self.p.d))
            return self.value(a, C, co), C, "closed_form"
        Q = self.k.Q
        if np.min(np.linalg.eigvalsh(Q)) <= 0:
            raise IndefiniteQuadratic(f"tangential shape operator has eigenvalue {np.min(np.linalg.eigvalsh(Q)):.3g}")
        C0 = np.zeros((K, r_dim, self.p.d))
        if self.p.z_affine:
            # exact: ν·f(Zσ + TC) - ν·f(Zσ) is linear, read off with unit steps
            ell = self._linear_coeffs(a, Zs, C0, 1.0)
            C = np.linalg.solve(Q, (ell - G).transpose(1, 0, 2).reshape(r_dim, -1)).reshape(r_dim, K, -1)
            C = C.transpose(1, 0, 2)
            return self.value(a, C, co), C, "closed_form"
        ell = self._linear_coeffs(a, Zs, C0, 1e-4)
        C = np.linalg.solve(Q, (ell - G).transpose(1, 0, 2).reshape(r_dim, -1)).reshape(r_dim, K, -1).transpose(1, 0, 2)
        return self._newton_inner(a, C, co)

    def _newton_inner(self, a, C, co, max_iter: int = 50, h1: float = 1e-4, h2: float = 1e-3):
        K, r_dim, d = C.shape
        q = r_dim * d
        val = self.value(a, C, co)
        active = np.ones(K, dtype=bool)

        def J(idx, cflat):
            sub = (co[0][idx], co[1][idx], co[2][idx])
            return self.value(a[idx], cflat.reshape(len(idx), r_dim, d), sub)

        c_all = C.reshape(K, q).copy()
        for _ in range(max_iter):
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            c = c_all[idx]
            f0 = val[idx]
            g = np.empty((idx.size, q))
            H = np.empty((idx.size, q, q))
            for i in range(q):
                e = np.zeros(q)
                e[i] = h1
                g[:, i] = (J(idx, c + e) - J(idx, c - e)) / (2 * h1)
                ei = np.zeros(q)
                ei[i] = h2
                H[:, i, i] = (J(idx, c + ei) - 2 * f0 + J(idx, c - ei)) / h2**2
                for j in range(i + 1, q):
                    ej = np.zeros(q)
                    ej[j] = h2
                    v = (J(idx, c + ei + ej) - J(idx, c + ei - ej) - J(idx, c - ei + ej) + J(idx, c - ei - ej)) / (
                        4 * h2 * h2
                    )
                    H[:, i, j] = H[:, j, i] = v
            w, U = np.linalg.eigh(H)
            w = np.minimum(w, -1e-8)
            step = -np.einsum("kij,kj,klj,kl->ki", U, 1.0 / w, U, g)
            small = np.max(np.abs(step), axis=1) <= 1e-11 * (1 + np.max(np.abs(c), axis=1))
            s = np.ones(idx.size)
            done = small.copy()
            gained = np.zeros(idx.size)
            for _ in range(30):
                todo = ~done
                if not np.any(todo):
                    break
                cand = c + s[:, None] * step
                vc = J(idx, cand)
                ok = todo & (vc >= f0)
                c[ok] = cand[ok]
                gained[ok] = vc[ok] - f0[ok]
                f0 = np.where(ok, vc, f0)
                done |= ok
                s = np.where(done, s, 0.5 * s)
            c_all[idx] = c
            val[idx] = f0
            converged = small | (gained <= 1e-14 * (1 + np.abs(f0))) | ~done
            active[idx[converged]] = False
        return val, c_all.reshape(K, r_dim, d), "iterative"


def _reduced_refine(obj: _Objective, cs: ControlSet, a0: np.ndarray, v0: float, *, iters: int = 50,
                    h1: float = 1e-4, h2: float = 1e-3, mu: float = 1e-8):
    """Projected regularized Newton on ``a -> sup_C J(a, C)`` from a grid seed."""
    p = a0.size
    a = a0.astype(float).copy()
    best = v0

    def phi(batch):
        return obj.inner(batch)[0]

    for _ in range(iters):
        pts = [a]
        for i in range(p):
            for h in (h1, -h1, h2, -h2):
                e = np.zeros(p)
                e[i] = h
                pts.append(a + e)
        for i in range(p):
            for j in range(i + 1, p):
                for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                    e = np.zeros(p)
                    e[i], e[j] = si * h2, sj * h2
                    pts.append(a + e)
        vals = phi(np.array(pts))
        f0 = vals[0]
        g = np.empty(p)
        H = np.empty((p, p))
        for i in range(p):
            vp1, vm1, vp2, vm2 = vals[1 + 4 * i : 5 + 4 * i]
            g[i] = (vp1 - vm1) / (2 * h1)
            H[i, i] = (vp2 - 2 * f0 + vm2) / h2**2
        k = 1 + 4 * p
        for i in range(p):
            for j in range(i + 1, p):
                pp, pm, mp, mm = vals[k : k + 4]
                k += 4
                H[i, j] = H[j, i] = (pp - pm - mp + mm) / (4 * h2 * h2)
        w, U = np.linalg.eigh(H)
        w = np.minimum(w, -mu)
        step = -(U @ ((U.T @ g) / w))
        if np.max(np.abs(step)) <= 1e-12 * (1 + np.max(np.abs(a))):
            break
        s = 1.0
        gained = 0.0
        for _ in range(40):
            cand = cs.project(a + s * step)
            if np.max(np.abs(cand - a)) <= 1e-14 * (1 + np.max(np.abs(a))):
                break
            vc = phi(cand[None])[0]
            if vc > best:
                gained = vc - best
                a, best = cand, vc
                break
            s *= 0.5
        if gained <= 1e-15 * (1 + abs(best)):
            break
    return a, best


def hamiltonian_sup(problem: ControlProblem, oracle: SetOracle, point: GraphPoint, *, route: str = "normal",
                    use_closed_form: bool = True, bundle: DerivativeBundle | None = None) -> HamiltonianValue:
    """``sup_{a, zeta tangential} n · h_V`` at a graph point.

    ``route="normal"`` builds the objective from intrinsic derivatives,
    ``route="distance"`` from raw signed-distance derivatives.
    """
    if bundle is None:
        bundle = oracle.bundle(point.t, point.x, point.y)
    T = point.tangent_basis
    if route == "normal":
        intr_batch = intrinsic_from_bundle(bundle)
        intr = intr_batch.take(0)
        pack = _normal_pack(intr, T)
    elif route == "distance":
        intr = None
        pack = _distance_pack(bundle, T)
    else:
        raise ValueError(f"unknown route {route!r}")
    lam = float(np.min(np.linalg.eigvalsh(pack.Q))) if problem.m > 1 else float("inf")
    obj = _Objective(problem, pack, point.t, point.x, point.y)

    if use_closed_form and problem.closed_form is not None and route == "normal":
        a_b, zeta_b = problem.closed_form(np.array([point.t]), point.x[None], point.y[None], intr_batch)
        a_star = np.atleast_1d(np.asarray(a_b, float)[0])
        zeta_star = np.asarray(zeta_b, float)[0].reshape(problem.m, problem.d)
        C = (T.T @ zeta_star)[None]
        val = float(obj.value(a_star[None], C)[0])
        return HamiltonianValue(val, a_star, zeta_star, "closed_form", lam, C[0])

    grid = problem.control_set.grid()
    vals, Cs, status = obj.inner(grid)
    k = int(np.argmax(vals))  # first maximizer: lexicographically smallest index
    a_star, best = grid[k], float(vals[k])
    a_star, best = _reduced_refine(obj, problem.control_set, a_star, best)
    val, C, status = obj.inner(a_star[None])
    if status == "closed_form" and problem.m > 1 and not problem.z_affine:
        status = "iterative"
    inner_status = "grid" if status == "closed_form" else status
    zeta_star = T @ C[0]
    return HamiltonianValue(float(val[0]), a_star, zeta_star, inner_status, lam, C[0])


def hjb_residual(problem: ControlProblem, oracle: SetOracle, point: GraphPoint | tuple, *,
                 use_closed_form: bool = True) -> HJBResidual:
    """Both forms of the HJB operator at one graph point.

    ``n_form = ∂_t V · n + H`` from intrinsic derivatives.  ``r_form`` is
    ``-(∇_t r + inf[...])`` computed from raw derivatives of ``r`` with an
    independent optimization; the sign flip makes the two directly
    comparable (the distance-form bracket is the negated normal-form one).
    """
    if not isinstance(point, GraphPoint):
        point = make_graph_point(oracle, *point)
    bundle = oracle.bundle(point.t, point.x, point.y)
    intr = intrinsic_from_bundle(bundle).take(0)
    hn = hamiltonian_sup(problem, oracle, point, route="normal", use_closed_form=use_closed_form, bundle=bundle)
    hr = hamiltonian_sup(problem, oracle, point, route="distance", use_closed_form=False, bundle=bundle)
    n_form = float(intr.dt_V @ intr.normal + hn.value)
    r_form = float(-bundle.grad_t[0] + hr.value)
    tol = 1e-9 if oracle.analytic else 1e-4
    return HJBResidual(n_form, r_form, hn.lambda_min, tol, hn.a_star, hn.zeta_star)


def drift_package(problem: ControlProblem, intr: IntrinsicDerivatives, t, x, y, a, zeta):
    """Batched pieces of ``h_V`` at controls ``a`` and tangential fields ``zeta``.

    Returns ``(h0, f_val, z_sigma, b, sigma)`` where ``h0 = ∂_x V b +
    ½ tr(σᵀ ∂_xx V σ) - K``, ``z_sigma = ∂_x V σ + zeta`` and ``f_val`` is
    ``f`` evaluated at ``z_sigma``.
    """
    b = problem.b(t, x, a)
    s = problem.sigma(t, x, a)
    n = intr.normal
    corr = np.einsum("nkj,nki,nij->n", zeta, intr.dx_n, s) + 0.5 * np.einsum("nkj,nkl,nlj->n", zeta, intr.dy_n, zeta)
    h0 = (
        np.einsum("nki,ni->nk", intr.dx_V, b)
        + 0.5 * np.einsum("nia,nkij,nja->nk", s, intr.dxx_V, s)
        - corr[:, None] * n
    )
    z_sigma = np.einsum("nki,nij->nkj", intr.dx_V, s) + zeta
    return h0, problem.f(t, x, y, z_sigma, a), z_sigma, b, s


# ---------------------------------------------------------------------------
# special residuals
# ---------------------------------------------------------------------------


def set_heat_residual(oracle: SetOracle, point: GraphPoint | tuple) -> float:
    """``n · [∂_t V + ½ tr ∂_xx V]`` (drift-free, unit diffusion)."""
    if not isinstance(point, GraphPoint):
        point = make_graph_point(oracle, *point)
    intr = intrinsic_from_bundle(oracle.bundle(point.t, point.x, point.y)).take(0)
    lap = np.einsum("kii->k", intr.dxx_V)
    return float(intr.normal @ (intr.dt_V + 0.5 * lap))


def scalar_reduction_residual(problem: ControlProblem, interval: IntervalSet, t: float, x) -> tuple[float, float]:
    """Standard HJB residuals ``(lower, upper)`` of an interval family.

    Upper: ``∂_t v + sup_a [b ∂_x v + ½ tr(σσᵀ ∂_xx v) + f(v, ∂_x v σ, a)]``;
    lower uses ``inf``.  Controls are optimized over the problem's grid.
    """
    if problem.m != 1:
        raise ValueError("scalar reduction needs m = 1")
    if not interval.analytic:
        raise ValueError("interval derivatives are required")
    x = np.atleast_1d(np.asarray(x, float))
    grid = problem.control_set.grid()
    K = len(grid)
    tt = np.full(K, float(t))
    xx = np.broadcast_to(x, (K, problem.d))
    out = []
    for which, pick in (("lower", np.min), ("upper", np.max)):
        one_t, one_x = np.array([float(t)]), x[None]
        v = getattr(interval, which)(one_t, one_x)[0]
        vt = getattr(interval, which + "_t")(one_t, one_x)[0]
        vx = getattr(interval, which + "_x")(one_t, one_x)[0]
        vxx = getattr(interval, which + "_xx")(one_t, one_x)[0]
        b = problem.b(tt, xx, grid)
        s = problem.sigma(tt, xx, grid)
        z = np.einsum("i,kij->kj", vx, s)[:, None, :]
        f = problem.f(tt, xx, np.full((K, 1), v), z, grid)[:, 0]
        ham = b @ vx + 0.5 * np.einsum("kia,ij,kja->k", s, vxx, s) + f
        out.append(float(vt + pick(ham)))
    return out[0], out[1]


def hat_equation_residual(product_oracle: SetOracle, point) -> float:
    """Residual of the heat-type equation satisfied by the joint signed distance.

    ``∇_t r + ½ [∇_xx r - 2 ∇_xy r (∇_x r/∇_y r) + ∇_yy r (∇_x r/∇_y r)²]``
    with finite-difference derivatives of ``r`` (``d = m = 1``).
    """
    if isinstance(point, GraphPoint):
        t, x, y = point.t, point.x, point.y
    else:
        t, x, y = point
    b = product_oracle.bundle(t, np.atleast_1d(x), np.atleast_1d(y))
    gy = b.grad_y[0, 0]
    if abs(gy) < 0.1:
        raise DegenerateYGradient(f"|∇_y r| = {abs(gy):.3g} < 0.1")
    ratio = b.grad_x[0, 0] / gy
    return float(
        b.grad_t[0] + 0.5 * (b.hess_xx[0, 0, 0] - 2 * b.hess_xy[0, 0, 0] * ratio + b.hess_yy[0, 0, 0] * ratio**2)
    )
