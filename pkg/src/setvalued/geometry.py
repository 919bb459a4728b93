"""Signed-distance geometry of set-valued maps.

A set-valued map ``(t, x) -> V(t, x) ⊂ R^m`` is handled exclusively through
its signed distance ``r(t, x, y)`` (negative inside).  Everything else in the
package (normals, projections, tangent frames, intrinsic derivatives, shape
operators) is derived from ``r`` and its first and second derivatives, which
an oracle supplies either analytically or by finite differences.

Array conventions
-----------------
All oracle callables are batched: ``t`` has shape ``(N,)``, ``x`` has shape
``(N, d)`` and ``y`` has shape ``(N, m)``.  Derivative blocks follow the
shapes documented on :class:`DerivativeBundle`.  The public single-point
helpers accept 1-d arrays and strip the batch axis again.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree
from scipy.stats import qmc

from .errors import (
    DegenerateGradient,
    EmptySet,
    NoBoundaryFound,
    NoConvergence,
    NotOnGraph,
    OutsideTube,
    TooCloseToTerminal,
)

__all__ = [
    "FDSteps",
    "DerivativeBundle",
    "SetOracle",
    "GraphPoint",
    "IntrinsicDerivatives",
    "as_batch",
    "signed_distance",
    "normal",
    "project_to_boundary",
    "project_batch",
    "tangent_basis",
    "tangent_project",
    "intrinsic_derivatives",
    "intrinsic_from_bundle",
    "fd_derivative_bundle",
    "make_graph_point",
    "ConvexPolygon",
    "hausdorff_distance",
    "boundary_hausdorff",
    "boundary_sample",
    "pacman_clouds",
]

RFunc = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# data types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FDSteps:
    """Finite-difference steps.

    ``first`` is used for gradients and ``second`` for Hessians.  Either may
    be a scalar or a sequence of length ``1 + d + m`` (ordering ``t, x, y``).
    """

    first: float | Sequence[float] = 1e-4
    second: float | Sequence[float] = 1e-3

    def vector(self, which: str, n: int) -> np.ndarray:
        h = np.asarray(self.first if which == "first" else self.second, dtype=float)
        h = np.broadcast_to(h, (n,)).copy()
        if np.any(h <= 0):
            raise ValueError("finite-difference steps must be positive")
        return h


@dataclass(frozen=True)
class DerivativeBundle:
    """First and second derivatives of ``r`` at a batch of points.

    Shapes: ``grad_t (N,)``, ``grad_x (N, d)``, ``grad_y (N, m)``,
    ``hess_xx (N, d, d)``, ``hess_xy (N, d, m)``, ``hess_yy (N, m, m)``.
    """

    grad_t: np.ndarray
    grad_x: np.ndarray
    grad_y: np.ndarray
    hess_xx: np.ndarray
    hess_xy: np.ndarray
    hess_yy: np.ndarray
    source: str = "analytic"

    def take(self, i: int) -> "DerivativeBundle":
        return DerivativeBundle(
            self.grad_t[i : i + 1],
            self.grad_x[i : i + 1],
            self.grad_y[i : i + 1],
            self.hess_xx[i : i + 1],
            self.hess_xy[i : i + 1],
            self.hess_yy[i : i + 1],
            self.source,
        )


@dataclass(frozen=True)
class SetOracle:
    """A time-indexed set-valued map presented through its signed distance.

    Parameters
    ----------
    r_eval
        Batched signed distance ``r(t, x, y)``.
    d, m
        State and value dimensions.
    derivs
        Optional batched analytic derivative provider returning a
        :class:`DerivativeBundle`.  When absent, finite differences are used.
    fd_steps
        Finite-difference steps.
    epsilon_band
        Half-width of the tube around the boundary graph on which the
        derivatives (and the projection) are trusted.
    horizon, delta_min
        For families that collapse at ``horizon``, derivative operations
        refuse ``t > horizon - delta_min``.
    """

    r_eval: RFunc
    d: int
    m: int
    derivs: Callable[[np.ndarray, np.ndarray, np.ndarray], DerivativeBundle] | None = None
    fd_steps: FDSteps = field(default_factory=FDSteps)
    epsilon_band: float = 0.25
    horizon: float | None = None
    delta_min: float | None = None
    name: str = "set"
    graph_tol_override: float | None = None

    @property
    def analytic(self) -> bool:
        return self.derivs is not None

    @property
    def graph_tol(self) -> float:
        if self.graph_tol_override is not None:
            return self.graph_tol_override
        return 1e-8 if self.analytic else 1e-5

    def r(self, t, x, y) -> np.ndarray:
        t, x, y, _ = as_batch(t, x, y, self.d, self.m)
        return np.asarray(self.r_eval(t, x, y), dtype=float)

    def check_time(self, t) -> None:
        if self.horizon is None:
            return
        dmin = self.delta_min if self.delta_min is not None else 1e-3 * self.horizon
        if np.any(np.asarray(t) > self.horizon - dmin + 1e-15):
            raise TooCloseToTerminal(
                f"{self.name}: t={np.max(t):.6g} exceeds horizon - delta_min = {self.horizon - dmin:.6g}"
            )

    def bundle(self, t, x, y) -> DerivativeBundle:
        """Analytic bundle when available, otherwise finite differences."""
        t, x, y, _ = as_batch(t, x, y, self.d, self.m)
        self.check_time(t)
        if self.derivs is not None:
            return self.derivs(t, x, y)
        return _fd_bundle(self, t, x, y)

    def grad_y(self, t, x, y) -> np.ndarray:
        """``∇_y r`` only; cheaper than a full bundle for FD oracles."""
        t, x, y, _ = as_batch(t, x, y, self.d, self.m)
        if self.derivs is not None:
            return self.derivs(t, x, y).grad_y
        h = self.fd_steps.vector("first", 1 + self.d + self.m)[1 + self.d :]
        g = np.empty_like(y)
        for j in range(self.m):
            e = np.zeros(self.m)
            e[j] = h[j]
            g[:, j] = (self.r_eval(t, x, y + e) - self.r_eval(t, x, y - e)) / (2 * h[j])
        return g


@dataclass(frozen=True)
class GraphPoint:
    """A point ``(t, x, y)`` on the boundary graph with its normal frame."""

    t: float
    x: np.ndarray
    y: np.ndarray
    normal: np.ndarray
    tangent_basis: np.ndarray


@dataclass(frozen=True)
class IntrinsicDerivatives:
    """Derivatives of the boundary along the graph (batched, leading axis N).

    ``dt_V (N, m)``, ``dx_V (N, m, d)``, ``dxx_V (N, m, d, d)`` where
    ``dxx_V[:, k, i, j]`` is the ``k``-th component of ``∂_{x_i x_j} V``,
    ``dx_n (N, m, d)`` with columns ``∂_{x_j} n``, ``dy_n (N, m, m)``.
    """

    normal: np.ndarray
    dt_V: np.ndarray
    dx_V: np.ndarray
    dxx_V: np.ndarray
    dx_n: np.ndarray
    dy_n: np.ndarray

    def take(self, i: int) -> "IntrinsicDerivatives":
        return IntrinsicDerivatives(
            *(getattr(self, f)[i] for f in ("normal", "dt_V", "dx_V", "dxx_V", "dx_n", "dy_n"))
        )


# ---------------------------------------------------------------------------
# batching helpers
# ---------------------------------------------------------------------------


def as_batch(t, x, y, d: int, m: int):
    """Coerce ``(t, x, y)`` to batched arrays; the last value flags single-point input."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    single = y.ndim <= 1 and x.ndim <= 1
    x = x.reshape(-1, d)
    y = y.reshape(-1, m)
    n = max(x.shape[0], y.shape[0])
    if x.shape[0] != n:
        x = np.broadcast_to(x, (n, d))
    if y.shape[0] != n:
        y = np.broadcast_to(y, (n, m))
    t = np.broadcast_to(np.asarray(t, dtype=float), (n,))
    return t, x, y, single


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------


def _fd_bundle(oracle: SetOracle, t, x, y) -> DerivativeBundle:
    d, m = oracle.d, oracle.m
    n = 1 + d + m
    h1 = oracle.fd_steps.vector("first", n)
    h2 = oracle.fd_steps.vector("second", n)
    z = np.concatenate([t[:, None], x, y], axis=1)

    def f(zz):
        return np.asarray(oracle.r_eval(zz[:, 0], zz[:, 1 : 1 + d], zz[:, 1 + d :]), dtype=float)

    def shifted(*pairs):
        zz = z.copy()
        for i, s in pairs:
            zz[:, i] += s
        return f(zz)

    grad = np.empty((z.shape[0], n))
    for i in range(n):
        grad[:, i] = (shifted((i, h1[i])) - shifted((i, -h1[i]))) / (2 * h1[i])

    # Hessian over the (x, y) block only; time second derivatives are unused
    f0 = f(z)
    idx = list(range(1, n))
    hess = np.zeros((z.shape[0], n - 1, n - 1))
    for a, i in enumerate(idx):
        hi = h2[i]
        hess[:, a, a] = (shifted((i, hi)) - 2 * f0 + shifted((i, -hi))) / hi**2
        for b in range(a + 1, len(idx)):
            j = idx[b]
            hj = h2[j]
            val = (
                shifted((i, hi), (j, hj))
                - shifted((i, hi), (j, -hj))
                - shifted((i, -hi), (j, hj))
                + shifted((i, -hi), (j, -hj))
            ) / (4 * hi * hj)
            hess[:, a, b] = val
            hess[:, b, a] = val
    return DerivativeBundle(
        grad_t=grad[:, 0],
        grad_x=grad[:, 1 : 1 + d],
        grad_y=grad[:, 1 + d :],
        hess_xx=hess[:, :d, :d],
        hess_xy=hess[:, :d, d:],
        hess_yy=hess[:, d:, d:],
        source="fd",
    )


def fd_derivative_bundle(oracle: SetOracle, t, x, y) -> DerivativeBundle:
    """Central-difference bundle with symmetrized Hessians.

    Raises :class:`OutsideTube` when the point is not within the ε-band.
    """
    t, x, y, _ = as_batch(t, x, y, oracle.d, oracle.m)
    r = oracle.r(t, x, y)
    if np.any(np.abs(r) >= oracle.epsilon_band):
        raise OutsideTube(f"|r|={np.max(np.abs(r)):.3g} >= band {oracle.epsilon_band}")
    return _fd_bundle(oracle, t, x, y)


# ---------------------------------------------------------------------------
# pointwise geometry
# ---------------------------------------------------------------------------


def signed_distance(oracle: SetOracle, t, x, y):
    """Signed distance; scalar for single-point input."""
    t, x, y, single = as_batch(t, x, y, oracle.d, oracle.m)
    r = oracle.r(t, x, y)
    return float(r[0]) if single else r


def _unit_normals(grad_y: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(grad_y, axis=-1)
    if np.any(norm < 0.5):
        raise DegenerateGradient(f"|grad_y r| = {np.min(norm):.3g} < 0.5")
    return grad_y / norm[..., None]


def normal(oracle: SetOracle, t, x, y) -> np.ndarray:
    """Outward unit normal at boundary points (``∇_y r`` normalized)."""
    t, x, y, single = as_batch(t, x, y, oracle.d, oracle.m)
    r = oracle.r(t, x, y)
    if np.any(np.abs(r) > oracle.graph_tol):
        raise NotOnGraph(f"|r| = {np.max(np.abs(r)):.3g} > graph_tol {oracle.graph_tol:g}")
    oracle.check_time(t)
    n = _unit_normals(oracle.grad_y(t, x, y))
    return n[0] if single else n


def project_batch(
    oracle: SetOracle,
    t,
    x,
    y,
    *,
    tol: float = 1e-10,
    max_iter: int = 100,
    band: float | None = None,
) -> np.ndarray:
    """Damped fixed-point projection ``y <- y - s r ∇_y r`` for a batch of points."""
    t, x, y, _ = as_batch(t, x, y, oracle.d, oracle.m)
    band = oracle.epsilon_band if band is None else band
    y = np.array(y, dtype=float)
    r = oracle.r(t, x, y)
    if np.any(np.abs(r) >= band):
        raise OutsideTube(f"|r| = {np.max(np.abs(r)):.3g} >= band {band:g}")
    active = np.abs(r) > tol
    for _ in range(max_iter):
        if not np.any(active):
            return y
        ia = np.flatnonzero(active)
        g = oracle.grad_y(t[ia], x[ia], y[ia])
        g2 = np.maximum(np.sum(g * g, axis=1), 1e-300)
        direction = (r[ia] / g2)[:, None] * g
        step = np.ones(ia.size)
        cand = y[ia] - direction
        rc = oracle.r(t[ia], x[ia], cand)
        for _ in range(40):
            worse = np.abs(rc) >= np.abs(r[ia])
            if not np.any(worse):
                break
            step[worse] *= 0.5
            cand[worse] = y[ia][worse] - step[worse, None] * direction[worse]
            rc[worse] = oracle.r(t[ia][worse], x[ia][worse], cand[worse])
        y[ia] = cand
        r[ia] = rc
        active = np.abs(r) > tol
    if np.any(active):
        raise NoConvergence(f"projection did not reach |r| <= {tol:g} in {max_iter} iterations")
    return y


def project_to_boundary(oracle: SetOracle, t, x, y, **kw) -> np.ndarray:
    """Nearest boundary point of ``V(t, x)`` to ``y``; valid inside the ε-band."""
    t, x, yb, single = as_batch(t, x, y, oracle.d, oracle.m)
    p = project_batch(oracle, t, x, yb, **kw)
    return p[0] if single else p


def tangent_basis(normal: np.ndarray, order: Sequence[int] | None = None) -> np.ndarray:
    """Orthonormal basis of the tangent space ``{v : v·n = 0}``.

    Built by Gram–Schmidt over standard basis vectors taken from the least
    aligned with ``n`` to the most aligned (stable sort), so the result is a
    deterministic function of ``n``.  ``order`` overrides the candidate order
    (used to check basis invariance).  Accepts ``(m,)`` or ``(N, m)``.
    """
    n = np.asarray(normal, dtype=float)
    single = n.ndim == 1
    n = n.reshape(-1, n.shape[-1])
    N, m = n.shape
    out = np.zeros((N, m, m - 1))
    for k in range(N):
        cand = np.argsort(np.abs(n[k]), kind="stable") if order is None else np.asarray(order)
        vecs = [n[k] / np.linalg.norm(n[k])]
        for idx in cand:
            if len(vecs) == m:
                break
            v = np.zeros(m)
            v[idx] = 1.0
            for u in vecs:
                v -= (u @ v) * u
            nv = np.linalg.norm(v)
            if nv > 1e-8:
                vecs.append(v / nv)
        if len(vecs) != m:
            raise ValueError("could not complete the tangent basis")
        out[k] = np.stack(vecs[1:], axis=1) if m > 1 else np.zeros((m, 0))
    return out[0] if single else out


def tangent_project(normal: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``(I - n nᵀ) v``; broadcasts over leading axes."""
    n = np.asarray(normal, dtype=float)
    v = np.asarray(v, dtype=float)
    return v - np.sum(n * v, axis=-1, keepdims=True) * n


def intrinsic_from_bundle(bundle: DerivativeBundle) -> IntrinsicDerivatives:
    """Intrinsic derivatives of the boundary from raw derivatives of ``r``."""
    n = _unit_normals(bundle.grad_y)
    P = np.eye(n.shape[1])[None] - n[:, :, None] * n[:, None, :]
    dt_V = -bundle.grad_t[:, None] * n
    dx_V = -n[:, :, None] * bundle.grad_x[:, None, :]
    dx_n = np.transpose(bundle.hess_xy, (0, 2, 1))
    hyy = 0.5 * (bundle.hess_yy + np.transpose(bundle.hess_yy, (0, 2, 1)))
    dy_n = P @ hyy @ P
    # ∂_{x_i x_j} V = -∇_{x_i x_j} r n - ∇_{x_j} r ∂_{x_i} n
    dxx_V = -n[:, :, None, None] * bundle.hess_xx[:, None, :, :] - (
        dx_n[:, :, :, None] * bundle.grad_x[:, None, None, :]
    )
    return IntrinsicDerivatives(n, dt_V, dx_V, dxx_V, dx_n, dy_n)


def make_graph_point(oracle: SetOracle, t: float, x, y, *, check: bool = True) -> GraphPoint:
    """Build a :class:`GraphPoint`, verifying membership in the graph."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    n = normal(oracle, t, x, y) if check else _unit_normals(oracle.grad_y(t, x, y))[0]
    return GraphPoint(float(t), x, y, n, tangent_basis(n))


def intrinsic_derivatives(oracle: SetOracle, point: GraphPoint | tuple) -> IntrinsicDerivatives:
    """Intrinsic derivatives at a single graph point (batch axis removed)."""
    if not isinstance(point, GraphPoint):
        point = make_graph_point(oracle, *point)
    r = oracle.r(point.t, point.x, point.y)
    if abs(r[0]) > oracle.graph_tol:
        raise NotOnGraph(f"|r| = {abs(r[0]):.3g} > graph_tol {oracle.graph_tol:g}")
    b = oracle.bundle(point.t, point.x, point.y)
    return intrinsic_from_bundle(b).take(0)


# ---------------------------------------------------------------------------
# Hausdorff distances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvexPolygon:
    """Convex hull of the given points, stored as counter-clockwise vertices."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] < 3:
            raise EmptySet("polygon needs at least three vertices")
        try:
            hull = ConvexHull(v)
        except QhullError:
            raise EmptySet("polygon has empty interior") from None
        object.__setattr__(self, "vertices", v[hull.vertices])

    @classmethod
    def regular(cls, radius: float, count: int, center=(0.0, 0.0)) -> "ConvexPolygon":
        th = 2 * np.pi * np.arange(count) / count
        return cls(np.column_stack([center[0] + radius * np.cos(th), center[1] + radius * np.sin(th)]))

    @property
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        a = self.vertices
        return a, np.roll(a, -1, axis=0)

    def halfplanes(self) -> tuple[np.ndarray, np.ndarray]:
        """Outward unit normals ``nu`` and offsets ``c`` with interior ``nu·p <= c``."""
        a, b = self.edges
        e = b - a
        nu = np.column_stack([e[:, 1], -e[:, 0]])
        nu /= np.linalg.norm(nu, axis=1, keepdims=True)
        return nu, np.sum(nu * a, axis=1)

    def boundary_distance(self, p: np.ndarray) -> np.ndarray:
        """Unsigned distance from points ``(k, 2)`` to the polygon boundary."""
        p = np.atleast_2d(p)
        a, b = self.edges
        e = b - a
        ee = np.maximum(np.sum(e * e, axis=1), 1e-300)
        s = np.clip(np.einsum("kij,ij->ki", p[:, None, :] - a[None], e) / ee, 0.0, 1.0)
        foot = a[None] + s[..., None] * e[None]
        return np.min(np.linalg.norm(p[:, None, :] - foot, axis=2), axis=1)

    def contains(self, p: np.ndarray) -> np.ndarray:
        nu, c = self.halfplanes()
        return np.all(np.atleast_2d(p) @ nu.T <= c + 1e-14, axis=1)

    def distance(self, p: np.ndarray) -> np.ndarray:
        """Distance from points to the (filled) polygon."""
        p = np.atleast_2d(p)
        return np.where(self.contains(p), 0.0, self.boundary_distance(p))


def _one_sided_cloud(a: np.ndarray, b: np.ndarray) -> float:
    dist, _ = cKDTree(b).query(a)
    return float(np.max(dist))


def hausdorff_distance(A, B) -> float:
    """Hausdorff distance between two filled convex polygons or two point clouds.

    For polygons the value is exact: the distance to a convex set is convex,
    so each one-sided supremum is attained at a vertex.
    """
    if isinstance(A, ConvexPolygon) and isinstance(B, ConvexPolygon):
        return float(max(np.max(B.distance(A.vertices)), np.max(A.distance(B.vertices))))
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.size == 0 or B.size == 0:
        raise EmptySet("empty point cloud")
    return max(_one_sided_cloud(A, B), _one_sided_cloud(B, A))


def _sup_boundary_distance(A: ConvexPolygon, B: ConvexPolygon) -> float:
    """``sup_{a ∈ ∂A} d(a, ∂B)`` exactly.

    Outside ``B`` the distance to ``∂B`` is the (convex) distance to ``B``, so
    its maximum along an edge of ``A`` sits at a vertex.  Inside ``B`` it is
    the concave piecewise-linear ``min_k (c_k - nu_k·a)``, whose maximum along
    a segment is attained at an endpoint or at a crossing of two pieces.
    """
    best = float(np.max(B.distance(A.vertices)))
    nu, c = B.halfplanes()
    a0, a1 = A.edges
    for p, q in zip(a0, a1):
        v = q - p
        alpha = c - nu @ p  # value at s=0 of each linear piece
        beta = -(nu @ v)  # slope in s
        cand = [0.0, 1.0]
        da = alpha[:, None] - alpha[None, :]
        db = beta[None, :] - beta[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            s = da / db
        s = s[np.isfinite(s)]
        cand.extend(s[(s > 0.0) & (s < 1.0)].tolist())
        s = np.asarray(cand)
        vals = np.min(alpha[None, :] + s[:, None] * beta[None, :], axis=1)
        best = max(best, float(np.max(vals)))
    return best


def boundary_hausdorff(A, B) -> float:
    """Hausdorff distance between boundaries (exact for convex polygons).

    For point clouds the inputs are taken to be boundary samples already.
    """
    if isinstance(A, ConvexPolygon) and isinstance(B, ConvexPolygon):
        return max(_sup_boundary_distance(A, B), _sup_boundary_distance(B, A))
    return hausdorff_distance(A, B)


def pacman_clouds(eps: float, n_theta: int = 4096, n_r: int = 200):
    """Point clouds for the unit disk and the disk minus the sector ``|θ| < eps``.

    Returns ``(disk, pacman, disk_boundary, pacman_boundary)``.  The angular
    grid contains ``0`` and ``±eps`` exactly so that the removed sector is
    represented and its edges are sampled.
    """
    th = np.concatenate([2 * np.pi * np.arange(n_theta) / n_theta - np.pi, [eps, -eps, 0.0]])
    th = np.unique(th)
    rad = np.linspace(0.0, 1.0, n_r + 1)
    R, TH = np.meshgrid(rad, th, indexing="ij")
    disk = np.column_stack([(R * np.cos(TH)).ravel(), (R * np.sin(TH)).ravel()])
    keep = np.abs(np.arctan2(disk[:, 1], disk[:, 0])) >= eps * (1 - 1e-9)
    keep |= np.linalg.norm(disk, axis=1) == 0.0
    pac = disk[keep]
    circle = np.column_stack([np.cos(th), np.sin(th)])
    arc = circle[np.abs(th) >= eps * (1 - 1e-9)]
    edge = np.concatenate(
        [rad[:, None] * np.array([np.cos(eps), np.sin(eps)]), rad[:, None] * np.array([np.cos(eps), -np.sin(eps)])]
    )
    return disk, pac, circle, np.concatenate([arc, edge])


# ---------------------------------------------------------------------------
# boundary sampling
# ---------------------------------------------------------------------------


def boundary_sample(
    oracle: SetOracle,
    t: float,
    x,
    count: int,
    box: tuple[Sequence[float], Sequence[float]],
    *,
    max_rounds: int = 20,
) -> np.ndarray:
    """``count`` boundary points obtained by projecting a Halton cloud in ``box``.

    Seeds outside the ε-band are discarded; the cloud is enlarged until enough
    seeds project successfully.
    """
    lo = np.asarray(box[0], dtype=float)
    hi = np.asarray(box[1], dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    sampler = qmc.Halton(d=oracle.m, scramble=False)
    found: list[np.ndarray] = []
    have = 0
    for _ in range(max_rounds):
        seeds = qmc.scale(sampler.random(max(4 * count, 64)), lo, hi)
        r = oracle.r(t, np.broadcast_to(x, (len(seeds), oracle.d)), seeds)
        ok = np.abs(r) < 0.95 * oracle.epsilon_band
        if not np.any(ok):
            continue
        s = seeds[ok]
        try:
            p = project_batch(oracle, t, np.broadcast_to(x, (len(s), oracle.d)), s)
        except NoConvergence:
            continue
        rp = oracle.r(t, np.broadcast_to(x, (len(p), oracle.d)), p)
        p = p[np.abs(rp) <= oracle.graph_tol]
        found.append(p)
        have += len(p)
        if have >= count:
            break
    if have == 0:
        raise NoBoundaryFound(f"no seed in {box} projected onto the boundary of {oracle.name}")
    out = np.concatenate(found)
    if len(out) < count:
        raise NoBoundaryFound(f"only {len(out)} of {count} boundary samples found")
    return out[:count]
