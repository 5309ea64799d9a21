"""Sphere-valued maps on meshes and the functionals evaluated on them.

Covers the explicit eigenmaps (identity of the sphere, the flat-torus maps
into S^3, the equilateral-torus map into S^5), tension and conservation-law
residuals, the Jacobi form, area densities of immersed surfaces and the
area of the canonical Moebius family near the boundary of the ball.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import minimize

from .errors import InvalidInputError
from .fem import (assemble_mass, assemble_stiffness, dirichlet_energy, stiffness_from_corners,
                  triangle_gradient_sq)
from .mesh import LatticeSpec, SurfaceMesh
from .quadrature import graded_panels
from .spherical import apply_moebius, rotation_to_north

UNIT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SphereValuedMap:
    """Per-vertex map into the unit sphere ``S^n`` of ``R^(n+1)``.

    Attributes
    ----------
    mesh : SurfaceMesh
    values : ndarray, shape (V, n+1)
    analytic : callable, optional
        Closed-form evaluator on domain points (cell coordinates on a torus,
        unit vectors on the sphere), used for refinement studies and
        adaptive quadrature.
    tag : str
    """

    mesh: SurfaceMesh
    values: np.ndarray
    analytic: Callable | None = None
    tag: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        u = np.array(self.values, dtype=float)
        if u.ndim != 2 or u.shape[0] != self.mesh.n_vertices:
            raise InvalidInputError(f"map values must have shape (V, n+1), got {u.shape}")
        dev = np.max(np.abs(np.linalg.norm(u, axis=1) - 1.0))
        if dev > UNIT_TOL:
            raise InvalidInputError(f"map leaves the unit sphere by {dev:.3e}")
        u.setflags(write=False)
        object.__setattr__(self, "values", u)

    @property
    def target_dim(self) -> int:
        return self.values.shape[1] - 1

    def energy(self, K=None) -> float:
        return dirichlet_energy(self.mesh, self.values, K)

    def compose_moebius(self, a) -> "SphereValuedMap":
        """``G_a o u`` evaluated at the vertices."""
        vals = apply_moebius(a, self.values)
        vals /= np.linalg.norm(vals, axis=1, keepdims=True)
        analytic = None
        if self.analytic is not None:
            f = self.analytic
            analytic = lambda x: apply_moebius(a, f(x))  # noqa: E731
        return SphereValuedMap(self.mesh, vals, analytic, f"G_a({self.tag})")

    def to_dict(self) -> dict:
        return {"target_dim": self.target_dim, "values": self.values.tolist(), "analytic_tag": self.tag or None}


# ------------------------------------------------------------ explicit maps
def identity_map(mesh: SurfaceMesh) -> SphereValuedMap:
    if not mesh.is_sphere:
        raise InvalidInputError("identity map needs a sphere mesh")
    return SphereValuedMap(mesh, mesh.vertices, lambda x: np.asarray(x, dtype=float), "identity")


def _check_lattice(mesh: SurfaceMesh, c: float, d: float):
    if not mesh.is_torus or mesh.lattice is None:
        raise InvalidInputError("torus map needs a torus mesh")
    if abs(mesh.lattice.c - c) > 1e-12 or abs(mesh.lattice.d - d) > 1e-12:
        raise InvalidInputError(
            f"lattice mismatch: mesh has ({mesh.lattice.c}, {mesh.lattice.d}), map needs ({c}, {d})")


def torus_eigenmap_values(c: float, d: float, xy) -> np.ndarray:
    xy = np.asarray(xy, dtype=float)
    x, y = xy[..., 0], xy[..., 1]
    th1 = 2 * np.pi * y / d
    th2 = 2 * np.pi * (c / d * y - x)
    return np.stack([np.sin(th1), np.cos(th1), np.sin(th2), np.cos(th2)], axis=-1) / np.sqrt(2.0)


def torus_eigenmap(c: float, d: float, mesh: SurfaceMesh) -> SphereValuedMap:
    """First-eigenfunction map of the rhombic torus into ``S^3``.

    Each component is a first Laplace eigenfunction of the flat metric when
    ``c^2 + d^2 = 1``; ``(c, d) = (0, 1)`` gives the Clifford torus.
    """
    _check_lattice(mesh, c, d)
    f = lambda xy: torus_eigenmap_values(c, d, xy)  # noqa: E731
    return SphereValuedMap(mesh, f(mesh.vertices), f, f"torus_eigenmap:{c:g},{d:g}")


def equilateral_s5_values(xy) -> np.ndarray:
    xy = np.asarray(xy, dtype=float)
    x1, x2 = xy[..., 0], xy[..., 1]
    s3 = np.sqrt(3.0)
    phases = [2 * np.pi * (x1 - x2 / s3), 4 * np.pi * x2 / s3, 2 * np.pi * (x1 + x2 / s3)]
    comps = []
    for th in phases:
        comps += [np.cos(th), np.sin(th)]
    return np.stack(comps, axis=-1) / s3


def equilateral_s5_map(mesh: SurfaceMesh) -> SphereValuedMap:
    """Map of the equilateral torus into ``S^5`` built from three unit exponentials."""
    lat = LatticeSpec.equilateral()
    _check_lattice(mesh, lat.c, lat.d)
    return SphereValuedMap(mesh, equilateral_s5_values(mesh.vertices), equilateral_s5_values, "equilateral_s5")


def circle_map(mesh: SurfaceMesh) -> SphereValuedMap:
    """``(sin 2 pi x, cos 2 pi x, 0)`` on the square torus: harmonic, with a nontrivial Jacobi field."""
    _check_lattice(mesh, 0.0, 1.0)

    def f(xy):
        x = np.asarray(xy, dtype=float)[..., 0]
        return np.stack([np.sin(2 * np.pi * x), np.cos(2 * np.pi * x), np.zeros_like(x)], axis=-1)
    return SphereValuedMap(mesh, f(mesh.vertices), f, "circle")


def circle_map_jacobi_field(mesh: SurfaceMesh) -> np.ndarray:
    """``(0, 0, sin 2 pi y)`` at the vertices."""
    y = mesh.vertices[:, 1]
    return np.column_stack([np.zeros_like(y), np.zeros_like(y), np.sin(2 * np.pi * y)])


# --------------------------------------------------------- dual seminorms
class _SeminormSolver:
    """Solve ``K x = r`` for ``r`` orthogonal to constants by pinning one vertex."""

    def __init__(self, K):
        K = sp.csr_matrix(K)
        self.n = K.shape[0]
        self.lu = spla.splu(sp.csc_matrix(K[1:, 1:]))

    def solve(self, r):
        r = np.asarray(r, dtype=float)
        x = np.zeros_like(r)
        if r.ndim == 1:
            x[1:] = self.lu.solve(r[1:])
        else:
            for c in range(r.shape[1]):
                x[1:, c] = self.lu.solve(np.ascontiguousarray(r[1:, c]))
        return x

    def dual_norm(self, r) -> float:
        """``sup_phi <r, phi> / |d phi|`` for ``r`` annihilating constants."""
        return float(np.sqrt(max(np.sum(r * self.solve(r)), 0.0)))


def _remove_constant(r, Mone, area):
    return r - np.outer(Mone / area, r.sum(axis=0)) if r.ndim == 2 else r - Mone * r.sum() / area


def tension_residual(u: SphereValuedMap, mu, lam: float, K=None) -> float:
    """Worst-case ``|<du, dv> - lam <u, v>_mu| / |dv|`` over mean-zero FE fields ``v``.

    The residual functional ``K u - lam M_mu u`` is paired through the exact
    discrete dual of the Dirichlet seminorm.  When ``u`` is balanced against
    ``mu`` the functional annihilates constants and the supremum over all
    fields coincides with the mean-zero one.
    """
    mesh = u.mesh
    K = assemble_stiffness(mesh) if K is None else K
    M = assemble_mass(mesh, mu)
    r = K @ u.values - lam * (M @ u.values)
    Mg_one = mesh.vertex_areas
    r = _remove_constant(r, Mg_one, mesh.total_area)
    return _SeminormSolver(K).dual_norm(r)


def conservation_residual(u: SphereValuedMap, K=None) -> np.ndarray:
    """Weak codifferential residuals of ``alpha^{ab} = u^a du^b - u^b du^a``.

    Discretely ``<alpha^{ab}, d phi>`` pairs to ``sum_i phi_i (u^a_i (K u^b)_i -
    u^b_i (K u^a)_i)``; each residual is the dual seminorm of that vector.
    Returns an antisymmetric matrix of nonnegative magnitudes (upper triangle
    filled, diagonal zero).
    """
    K = assemble_stiffness(u.mesh) if K is None else K
    U = u.values
    KU = K @ U
    solver = _SeminormSolver(K)
    n1 = U.shape[1]
    R = np.zeros((n1, n1))
    for a in range(n1):
        for b in range(a + 1, n1):
            r = U[:, a] * KU[:, b] - U[:, b] * KU[:, a]
            R[a, b] = R[b, a] = solver.dual_norm(r)
    return R


# ------------------------------------------------------------- Jacobi form
def energy_density_at_vertices(u: SphereValuedMap, K=None) -> np.ndarray:
    """Vertex energy density ``<u_i, (K u)_i> / m_i``, a quadrature of ``|du|^2``.

    For unit vectors ``<u_i, (K u)_i> = 1/2 sum_j w_ij |u_i - u_j|^2``, and
    the vertex values integrate (against lumped areas) to ``2 E(u)``.
    """
    K = assemble_stiffness(u.mesh) if K is None else K
    return np.einsum("ic,ic->i", u.values, K @ u.values) / u.mesh.vertex_areas


def _tangent_project(u, v, tol=1e-8):
    v = np.asarray(v, dtype=float).reshape(u.values.shape)
    normal = np.einsum("ic,ic->i", v, u.values)
    flagged = bool(np.max(np.abs(normal)) > tol)
    if flagged:
        v = v - normal[:, None] * u.values
    return v, flagged


def jacobi_form(u: SphereValuedMap, v, w, K=None) -> float:
    """``I_u(v, w) = int <dv, dw> - |du|^2 <v, w>`` on fields tangent to ``u``.

    The potential term uses vertex quadrature of the energy density (see
    :func:`energy_density_at_vertices`), which makes the form exactly
    symmetric and annihilates the rotation fields ``B u`` whenever ``u`` is
    discretely harmonic.  Fields that are not pointwise orthogonal to ``u``
    within 1e-8 are projected first.
    """
    K = assemble_stiffness(u.mesh) if K is None else K
    v, _ = _tangent_project(u, v)
    w, _ = _tangent_project(u, w)
    e = energy_density_at_vertices(u, K) * u.mesh.vertex_areas
    return float(np.sum(v * (K @ w)) - np.sum(e[:, None] * v * w))


@dataclass
class JacobiAnalysis:
    form_value: float          # I_u(v, v)
    form_norm: float           # sup_w |I_u(v, w)| / |w|_{W^{1,2}}
    trivial_fraction: float    # L2 share of v in span{B u}
    nontrivial_residual: float  # |v - P v|_{L2} / |v|_{L2}
    projected: bool
    is_jacobi: bool
    is_nontrivial: bool


def jacobi_analysis(u: SphereValuedMap, v, threshold: float = 1e-4, K=None) -> JacobiAnalysis:
    """Test whether ``v`` is a Jacobi field along ``u`` and whether it is a rotation field."""
    mesh = u.mesh
    K = assemble_stiffness(mesh) if K is None else K
    Mg = assemble_mass(mesh)
    v, flagged = _tangent_project(u, v)
    e = energy_density_at_vertices(u, K) * mesh.vertex_areas
    r = K @ v - e[:, None] * v
    # restrict the residual functional to tangent fields
    r = r - np.einsum("ic,ic->i", r, u.values)[:, None] * u.values
    lu = spla.splu(sp.csc_matrix(K + Mg))
    z = np.column_stack([lu.solve(np.ascontiguousarray(r[:, c])) for c in range(r.shape[1])])
    form_norm = float(np.sqrt(max(np.sum(r * z), 0.0)))
    form_value = float(np.sum(v * (K @ v)) - np.sum(e[:, None] * v * v))
    # Gram-Schmidt against {B u : B skew}
    U = u.values
    n1 = U.shape[1]
    basis = []
    for a in range(n1):
        for b in range(a + 1, n1):
            f = np.zeros_like(U)
            f[:, a] = U[:, b]
            f[:, b] = -U[:, a]
            basis.append(f.ravel())
    B = np.array(basis).T  # (V*n1, n_rot)
    Wd = np.repeat(mesh.vertex_areas, n1)
    G = B.T @ (Wd[:, None] * B)
    coef = np.linalg.lstsq(G, B.T @ (Wd * v.ravel()), rcond=1e-12)[0]
    vt = B @ coef
    vnorm = np.sqrt(np.sum(Wd * v.ravel() ** 2))
    resid = np.sqrt(np.sum(Wd * (v.ravel() - vt) ** 2)) / vnorm if vnorm > 0 else 0.0
    trivial = np.sqrt(np.sum(Wd * vt ** 2)) / vnorm if vnorm > 0 else 0.0
    is_jacobi = form_norm < threshold * max(1.0, vnorm)
    return JacobiAnalysis(form_value, form_norm, float(trivial), float(resid), flagged,
                          bool(is_jacobi), bool(is_jacobi and resid > threshold))


# ------------------------------------------------- induced geometry of F
def induced_areas(F: SphereValuedMap) -> np.ndarray:
    """Areas of the image triangles (the induced metric of the PL immersion)."""
    P = F.values[F.mesh.triangles]
    a = P[:, 1] - P[:, 0]
    b = P[:, 2] - P[:, 0]
    aa = np.einsum("ij,ij->i", a, a)
    bb = np.einsum("ij,ij->i", b, b)
    ab = np.einsum("ij,ij->i", a, b)
    return 0.5 * np.sqrt(np.maximum(aa * bb - ab * ab, 0.0))


def mean_curvature_vectors(F: SphereValuedMap) -> np.ndarray:
    """``H_F = Delta_{g_F} F`` at vertices: induced-metric cotangent Laplacian over lumped areas."""
    mesh = F.mesh
    P = F.values[mesh.triangles]
    KF = stiffness_from_corners(P, mesh.triangles, mesh.n_vertices)
    A = induced_areas(F)
    m = np.zeros(mesh.n_vertices)
    np.add.at(m, mesh.triangles.ravel(), np.repeat(A / 3.0, 3))
    return (KF @ F.values) / m[:, None]


def mean_curvature_sup(F: SphereValuedMap) -> float:
    return float(np.max(np.linalg.norm(mean_curvature_vectors(F), axis=1)))


def _subdivide_tri(P, depth):
    """Midpoint 1-to-4 refinement of a batch of triangles ``(N, 3, D)``."""
    for _ in range(depth):
        a, b, c = P[:, 0], P[:, 1], P[:, 2]
        ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
        P = np.concatenate([np.stack(t, axis=1) for t in
                            ((a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca))])
    return P


def area_density(F: SphereValuedMap, y, r: float, depth: int = 3) -> float:
    """``Theta_F(y, r) = Area_{g_F}({|F - y| < r}) / r^2`` for the PL immersion.

    Triangles with all corners inside count fully, triangles certainly
    outside are skipped, and straddling triangles are refined ``depth`` times
    and counted by sub-triangle centroids.
    """
    if not r > 0:
        raise InvalidInputError(f"radius r={r} must be positive")
    y = np.asarray(y, dtype=float)
    P = F.values[F.mesh.triangles]
    A = induced_areas(F)
    dist = np.linalg.norm(P - y[None, None, :], axis=2)
    diam = np.max(np.linalg.norm(P - P[:, [1, 2, 0]], axis=2), axis=1)
    inside = np.all(dist < r, axis=1)
    outside = dist.min(axis=1) - diam >= r
    straddle = ~(inside | outside)
    area = A[inside].sum()
    if np.any(straddle):
        sub = _subdivide_tri(P[straddle], depth)
        sub_area = np.tile(A[straddle] / 4 ** depth, 4 ** depth)
        cen = sub.mean(axis=1)
        area += sub_area[np.linalg.norm(cen - y, axis=1) < r].sum()
    return float(area / r ** 2)


# ------------------------------------------- canonical family near |a| = 1
def _preimage(F: SphereValuedMap, y):
    """Domain point whose image is closest to ``y`` (nearest vertex, then refined)."""
    i = int(np.argmin(np.linalg.norm(F.values - y, axis=1)))
    x0 = F.mesh.vertices[i]
    if F.mesh.is_sphere:
        return x0 / np.linalg.norm(x0)
    obj = lambda x: float(np.sum((F.analytic(x[None, :])[0] - y) ** 2))  # noqa: E731
    res = minimize(obj, x0, method="Nelder-Mead", options={"xatol": 1e-13, "fatol": 1e-28, "maxiter": 4000})
    return res.x


class AnalyticAreaIntegrator:
    """``Area(G_a o F) = int (1 - |a|^2)^2 / |F + a|^4 dv_{g_F}`` by graded quadrature.

    The parameter domain (fractional lattice coordinates on a torus, polar
    angles on the sphere) is split into Gauss-Legendre panels graded toward
    the preimage of the concentration point, and the induced area element is
    computed from central differences of the closed-form evaluator.
    """

    def __init__(self, F: SphereValuedMap, center_point, fd_step=1e-6, order=10):
        if F.analytic is None:
            raise InvalidInputError("adaptive area quadrature needs an analytic evaluator")
        self.F = F
        self.h = fd_step
        self.order = order
        self.mesh = F.mesh
        self.center = np.asarray(center_point, dtype=float)

    def _nodes(self, width):
        mesh = self.mesh
        if mesh.is_torus:
            B = mesh.lattice.basis
            frac = self.center @ np.linalg.inv(B)
            s, ws = graded_panels(frac[0], frac[0] - 0.5, frac[0] + 0.5, min_width=width, order=self.order)
            t, wt = graded_panels(frac[1], frac[1] - 0.5, frac[1] + 0.5, min_width=width, order=self.order)
            S, T = np.meshgrid(s, t, indexing="ij")
            W = np.outer(ws, wt).ravel()
            U = np.column_stack([S.ravel(), T.ravel()])
            to_domain = lambda uv: uv @ B  # noqa: E731
            return U, W, to_domain
        Q = rotation_to_north(self.center)
        th, wth = graded_panels(0.0, 0.0, np.pi, min_width=width, order=self.order)
        nph = 8 * self.order
        ph = 2 * np.pi * (np.arange(nph) + 0.5) / nph
        TH, PH = np.meshgrid(th, ph, indexing="ij")
        W = np.outer(wth, np.full(nph, 2 * np.pi / nph)).ravel()
        U = np.column_stack([TH.ravel(), PH.ravel()])

        def to_domain(uv):
            t, p = uv[:, 0], uv[:, 1]
            x = np.column_stack([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)])
            return x @ Q
        return U, W, to_domain

    def _area_element(self, U, to_domain):
        f = lambda uv: self.F.analytic(to_domain(uv))  # noqa: E731
        h = self.h
        e0 = np.array([h, 0.0])
        e1 = np.array([0.0, h])
        Fu = (f(U + e0) - f(U - e0)) / (2 * h)
        Fv = (f(U + e1) - f(U - e1)) / (2 * h)
        g11 = np.einsum("ij,ij->i", Fu, Fu)
        g22 = np.einsum("ij,ij->i", Fv, Fv)
        g12 = np.einsum("ij,ij->i", Fu, Fv)
        return f(U), np.sqrt(np.maximum(g11 * g22 - g12 * g12, 0.0))

    def area(self, a, width=None) -> float:
        a = np.asarray(a, dtype=float)
        one_minus = 1.0 - np.linalg.norm(a)
        width = max(1e-3 * one_minus, 1e-9) if width is None else width
        U, W, to_domain = self._nodes(width)
        Fx, dA = self._area_element(U, to_domain)
        wgt = (1.0 - a @ a) ** 2 / np.sum((Fx + a) ** 2, axis=1) ** 2
        return float(np.sum(W * dA * wgt))

    def total_area(self) -> float:
        return self.area(np.zeros(self.F.values.shape[1]), width=0.05)


def area_density_limit(F: SphereValuedMap, y, radii=(0.4, 0.3, 0.2), depth: int = 3) -> float:
    """``Theta_F(y, 0)`` from a least-squares fit ``Theta(r) = c0 + c2 r^2`` over ``radii``.

    The even expansion holds at smooth points of an immersion; radii well
    above the mesh size keep the PL sublevel-set error small.
    """
    r = np.asarray(radii, dtype=float)
    th = np.array([area_density(F, y, ri, depth) for ri in r])
    A = np.column_stack([np.ones_like(r), r ** 2])
    coef, *_ = np.linalg.lstsq(A, th, rcond=None)
    return float(coef[0])


def area_bracket(t: float, area_F: float, H: float, theta0: float, theta_delta: float):
    """Explicit lower and upper bounds on ``Area(G_a o F)`` for ``|a| = t`` at ``delta = (1-t)^(1/3)``.

    ``theta0`` is ``Theta_F(-alpha, 0)`` and ``theta_delta`` is
    ``Theta_F(-alpha, delta)``; ``H`` bounds the mean curvature.  Valid when
    ``delta^3 < 1/2``.
    """
    d = (1.0 - t) ** (1.0 / 3.0)
    e2 = d * d * np.exp(2 * H)
    lower = (-(4 + e2) * d * d / t ** 2 * area_F
             + 2 * (1 - t * t) ** 2 * np.exp(-H * d) * theta0
             * (1 / (2 * t * (1 - t) ** 2) - 1 / (t * t * d * d)))
    upper = (1 + t) ** 2 / t * np.exp(H * d) * theta_delta + 4 * (1 + e2) * d * d / t ** 2 * area_F
    return float(lower), float(upper), float(d)


@dataclass
class AreaLimitResult:
    t: np.ndarray
    areas: np.ndarray
    limit: float
    limit_fit: float
    four_theta: float
    lower: np.ndarray
    upper: np.ndarray
    inconclusive: bool

    @property
    def inside_bracket(self) -> np.ndarray:
        return (self.lower <= self.areas) & (self.areas <= self.upper)

    def to_dict(self) -> dict:
        return {"t": self.t.tolist(), "areas": self.areas.tolist(), "limit": self.limit,
                "limit_fit": self.limit_fit, "four_theta": self.four_theta,
                "lower": self.lower.tolist(), "upper": self.upper.tolist(),
                "inconclusive": self.inconclusive}


def moebius_area_limit(F: SphereValuedMap, alpha, t_grid=(0.9, 0.95, 0.99, 0.995),
                       theta_radii=(0.4, 0.3, 0.2), rel_tol: float = 1e-2) -> AreaLimitResult:
    """Limit of ``Area(G_{t alpha} o F)`` as ``t -> 1`` with the explicit bracket per sample.

    Areas come from :class:`AnalyticAreaIntegrator`.  The limit is a
    two-point Richardson step in ``s = 1 - t`` (error ``O(s^2)``) on the two
    smallest ``s``, cross-checked by a least-squares fit ``c0 + c1 s + c2 s^2``
    on all samples; disagreement above ``rel_tol`` flags the result
    inconclusive.
    """
    alpha = np.asarray(alpha, dtype=float)
    nrm = np.linalg.norm(alpha)
    if abs(nrm - 1.0) > 1e-8:
        raise InvalidInputError(f"alpha must be a unit vector, |alpha| = {nrm}")
    t = np.sort(np.asarray(t_grid, dtype=float))
    if len(t) < 3 or t[0] <= 0 or t[-1] >= 1:
        raise InvalidInputError("t grid needs at least three values in (0, 1)")
    y = -alpha
    integ = AnalyticAreaIntegrator(F, _preimage(F, y))
    areas = np.array([integ.area(ti * alpha) for ti in t])
    s = 1.0 - t
    s1, s2 = s[-1], s[-2]
    limit = (s2 ** 2 * areas[-1] - s1 ** 2 * areas[-2]) / (s2 ** 2 - s1 ** 2)
    V = np.column_stack([np.ones_like(s), s, s ** 2])
    limit_fit = float(np.linalg.lstsq(V, areas, rcond=None)[0][0])
    theta0 = area_density_limit(F, y, theta_radii)
    area_F = integ.total_area()
    H = mean_curvature_sup(F)
    lo, up = [], []
    for ti in t:
        d = (1.0 - ti) ** (1.0 / 3.0)
        l, u, _ = area_bracket(ti, area_F, H, theta0, area_density(F, y, d))
        lo.append(l)
        up.append(u)
    bad = abs(limit - limit_fit) > rel_tol * abs(limit)
    return AreaLimitResult(t, areas, float(limit), limit_fit, 4 * theta0, np.array(lo), np.array(up), bool(bad))


__all__ = [
    "area_density_limit", "area_bracket", "AreaLimitResult", "moebius_area_limit",
    "SphereValuedMap", "identity_map", "torus_eigenmap", "equilateral_s5_map", "circle_map",
    "circle_map_jacobi_field", "tension_residual", "conservation_residual", "jacobi_form",
    "jacobi_analysis", "area_density", "mean_curvature_sup", "AnalyticAreaIntegrator",
]
