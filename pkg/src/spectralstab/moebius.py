"""Conformal-group machinery on meshes.

Hersch balancing of measures, cap reflections as sphere-valued maps, the
two-constraint (cap plus dilation) balancing search, and the energy and
Hessian of the canonical family ``a -> G_a o u``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.special import expit

from .errors import BalanceFailure, DegenerateMeasureError, InvalidInputError, UnsupportedTopologyError
from .fem import assemble_mass, assemble_stiffness, dirichlet_energy, triangle_gradient_sq, weighted_mass
from .maps import SphereValuedMap, conservation_residual
from .measure import MeasureOnMesh, quadrature_nodes, total_mass
from .mesh import SurfaceMesh
from .quadrature import TRI7_BARY, TRI7_WEIGHTS
from .spherical import (MoebiusParam, SphericalCap, apply_moebius, cap_reflection, conformal_factor,
                        image_cap, reflect_across_cap, rotation_to_north)

__all__ = [
    "MoebiusParam", "SphericalCap", "apply_moebius", "conformal_factor", "reflect_across_cap",
    "BalanceResult", "hersch_balance", "cap_reflection_map", "NadirashviliResult",
    "nadirashvili_balance", "canonical_family_energy", "HessianResult", "hessian_H0",
]


# --------------------------------------------------------------- balancing
@dataclass
class BalanceResult:
    a: MoebiusParam
    residual: float      # |int G_a dmu| / mu(M)
    iterations: int
    method: str
    restarted: bool = False

    def to_dict(self) -> dict:
        return {"a": list(self.a.a), "residual": self.residual, "iterations": self.iterations,
                "method": self.method, "restarted": self.restarted}


def center_of_mass_fn(mesh: SurfaceMesh, mu: MeasureOnMesh, method: str = "quadrature"):
    """Return ``a -> int G_a dmu / mu(M)``.

    ``quadrature`` composes ``G_a`` with the measure's quadrature nodes (the
    continuum moment); ``interpolant`` takes moments of the PL interpolant of
    ``G_a`` at the vertices (``1^T M_mu I_h(G_a)``), which is the balancing
    notion of discrete eigenvalue problems.
    """
    if not mesh.is_sphere:
        raise UnsupportedTopologyError("Hersch balancing is defined on the sphere")
    mass = total_mass(mu, mesh)
    if method == "quadrature":
        X, W = quadrature_nodes(mesh, mu)
        W = W / mass
        return lambda a: W @ apply_moebius(a, X)
    if method == "interpolant":
        w = np.asarray(assemble_mass(mesh, mu).sum(axis=1)).ravel() / mass
        V = mesh.vertices
        return lambda a: w @ apply_moebius(a, V)
    raise InvalidInputError(f"unknown balancing method {method!r}")


def _fd_jacobian(F, a, f0, h=1e-7):
    J = np.empty((3, 3))
    step = h * max(1.0 - np.linalg.norm(a), 1e-3)
    for j in range(3):
        e = np.zeros(3)
        e[j] = step
        J[:, j] = (F(a + e) - F(a - e)) / (2 * step)
    return J


def _newton(F, a, tol, max_iter, cap=0.2):
    f = F(a)
    it = 0
    for it in range(1, max_iter + 1):
        if np.linalg.norm(f) <= tol:
            return a, f, it - 1, True
        J = _fd_jacobian(F, a, f)
        try:
            step = -np.linalg.solve(J, f)
        except np.linalg.LinAlgError:
            return a, f, it, False
        norm = np.linalg.norm(step)
        if norm > cap:
            step *= cap / norm
        accepted = False
        lam = 1.0
        for _ in range(30):
            trial = a + lam * step
            if np.linalg.norm(trial) < 1.0 - 1e-12:
                ft = F(trial)
                if np.linalg.norm(ft) < np.linalg.norm(f):
                    a, f, accepted = trial, ft, True
                    break
            lam *= 0.5
        if not accepted:
            return a, f, it, False
    return a, f, max_iter, np.linalg.norm(f) <= tol


def hersch_balance(mesh: SurfaceMesh, mu: MeasureOnMesh, *, method: str = "quadrature",
                   tol: float = 1e-10, max_iter: int = 80) -> BalanceResult:
    """Find ``a`` with ``int G_a dmu = 0`` by damped Newton.

    The Jacobian is a central finite difference, steps are capped at 0.2 in
    ball coordinates with backtracking, and on failure the search restarts
    from the best point of a bisection along the ray ``-F(0) / |F(0)|``.
    """
    mu.check_mesh(mesh)
    if mu.is_single_atom:
        raise DegenerateMeasureError("a single atom cannot be balanced: the balancing point escapes to the sphere")
    F = center_of_mass_fn(mesh, mu, method)
    a0 = np.zeros(3)
    f0 = F(a0)
    if np.linalg.norm(f0) <= tol:
        return BalanceResult(MoebiusParam(tuple(a0)), float(np.linalg.norm(f0)), 0, method)
    a, f, it, ok = _newton(F, a0, tol, max_iter)
    restarted = False
    if not ok:
        restarted = True
        e = -f0 / np.linalg.norm(f0)
        lo, hi = 0.0, 1.0 - 1e-9
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if F(mid * e) @ e < 0:
                lo = mid
            else:
                hi = mid
        a, f, it2, ok = _newton(F, lo * e, tol, max_iter)
        it += it2
    if not ok:
        raise BalanceFailure(f"Hersch balancing did not converge (residual {np.linalg.norm(f):.3e})",
                             best=a, residual=float(np.linalg.norm(f)))
    return BalanceResult(MoebiusParam(tuple(a)), float(np.linalg.norm(f)), it, method, restarted)


# ---------------------------------------------------------- cap reflection
def cap_reflection_map(cap: SphericalCap, mesh: SurfaceMesh) -> SphereValuedMap:
    """``R_Z`` at the vertices: identity off the cap, conformal reflection on it."""
    if not mesh.is_sphere:
        raise UnsupportedTopologyError("cap reflections need a sphere mesh")
    vals = cap_reflection(cap, mesh.vertices)
    vals /= np.linalg.norm(vals, axis=1, keepdims=True)
    return SphereValuedMap(mesh, vals, lambda x: cap_reflection(cap, x), f"cap_reflection:{cap.radius:g}")


def cap_reflection_energy(cap: SphericalCap, scale: float = 1.0) -> float:
    """Closed form ``2 E(R_Z) = 16 pi - 4 Area(Z)`` (domain scale is irrelevant)."""
    return 16 * np.pi - 4 * cap.area


# ----------------------------------------------- two-constraint balancing
@dataclass
class NadirashviliResult:
    a: MoebiusParam
    domain_cap: SphericalCap      # Z' on the original sphere
    cap: SphericalCap             # Z = G_a(Z'), the cap of the pushed-forward picture
    residual: float               # |moments| / mu(M)
    balanced: bool
    map: SphereValuedMap          # u = G_a o R_{Z'} at the vertices
    energy2: float                # discrete 2E(u)
    energy2_formula: float        # 16 pi - 4 Area(Z)
    starts: int
    meta: dict = field(default_factory=dict)

    @property
    def status(self) -> str:
        return "BALANCED" if self.balanced else "UNBALANCED"


def _unpack(theta):
    """``(v, polar, azimuth, s) -> (a, p, r)`` with ``a = tanh|v| v/|v|`` and ``r = pi sigmoid(s)``."""
    v = theta[:3]
    nv = np.linalg.norm(v)
    # tanh saturates in floating point; keep |a| strictly inside the ball
    a = v * (min(np.tanh(nv), 1.0 - 1e-12) / nv) if nv > 1e-14 else v.copy()
    th, ph = theta[3], theta[4]
    p = np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
    r = np.pi * expit(theta[5])
    return a, p, float(np.clip(r, 1e-9, np.pi - 1e-9))


def _pack(a, p, r):
    a = np.asarray(a, dtype=float)
    na = np.linalg.norm(a)
    v = a * (np.arctanh(na) / na) if na > 1e-14 else a.copy()
    th = np.arccos(np.clip(p[2], -1.0, 1.0))
    ph = np.arctan2(p[1], p[0])
    return np.concatenate([v, [th, ph, np.log(r / (np.pi - r))]])


def nadirashvili_balance(mesh: SurfaceMesh, mu: MeasureOnMesh, phi1, *, n_starts: int = 12,
                         seed: int = 0, tol: float = 1e-8, max_nfev: int = 2000) -> NadirashviliResult:
    """Search ``(a, Z')`` with ``int G_a o R_{Z'} dmu = int phi_1 G_a o R_{Z'} dmu = 0``.

    Moments are taken of the PL interpolant of the map against ``M_mu``.
    The six residuals are minimized by least squares from deterministic
    multi-starts; the cap is parametrized by an unnormalized center vector
    and a logistic radius.  Success means residual at most ``tol * mu(M)``.
    """
    if not mesh.is_sphere:
        raise UnsupportedTopologyError("cap balancing needs a sphere mesh")
    M = assemble_mass(mesh, mu)
    mass = total_mass(mu, mesh)
    phi1 = np.asarray(phi1, dtype=float)
    phi1 = phi1 / np.sqrt(phi1 @ (M @ phi1))
    w0 = np.asarray(M.sum(axis=1)).ravel()
    w1 = (M @ phi1) * np.sqrt(mass)
    X = mesh.vertices

    def evaluate(theta):
        a, p, r = _unpack(theta)
        cap = SphericalCap(tuple(p), r)
        U = apply_moebius(a, cap_reflection(cap, X))
        return a, cap, U

    def resid(theta):
        _, _, U = evaluate(theta)
        return np.concatenate([w0 @ U, w1 @ U]) / mass

    # axis of phi1 as a linear function: the natural cap direction
    axis = (M @ phi1) @ X
    axis = axis / np.linalg.norm(axis) if np.linalg.norm(axis) > 0 else np.array([0.0, 0.0, 1.0])
    rng = np.random.default_rng(seed)
    starts = []
    for sgn in (1.0, -1.0):
        for r0 in (np.pi / 2, np.pi / 3, 2 * np.pi / 3):
            starts.append(_pack(0.3 * sgn * axis, sgn * axis, r0))
    while len(starts) < n_starts:
        q, p = rng.standard_normal((2, 3))
        starts.append(_pack(0.5 * rng.uniform() * q / np.linalg.norm(q), p / np.linalg.norm(p),
                            rng.uniform(0.3, np.pi - 0.3)))

    best = None
    for i, th0 in enumerate(starts[:n_starts]):
        sol = least_squares(resid, th0, method="trf", x_scale="jac", xtol=1e-15, ftol=1e-15,
                            gtol=1e-15, max_nfev=max_nfev)
        val = float(np.linalg.norm(sol.fun))
        if best is None or val < best[0]:
            best = (val, sol.x, i)
        if val <= tol:
            break
    val, theta, idx = best
    a, cap_dom, U = evaluate(theta)
    U = U / np.linalg.norm(U, axis=1, keepdims=True)
    amp = MoebiusParam(tuple(a))
    u = SphereValuedMap(mesh, U, None, "nadirashvili")
    Z = image_cap(a, cap_dom)
    e2 = 2 * dirichlet_energy(mesh, U)
    return NadirashviliResult(amp, cap_dom, Z, val, bool(val <= tol), u, e2,
                              16 * np.pi - 4 * Z.area, idx + 1)


# ---------------------------------------------------- canonical family
def _interp_at_nodes(mesh, values):
    U = np.asarray(values)[mesh.triangles]  # (F, 3, n)
    Y = np.einsum("qk,fkc->fqc", TRI7_BARY, U)
    return Y / np.linalg.norm(Y, axis=2, keepdims=True)


def canonical_family_energy(u: SphereValuedMap, a) -> float:
    """``E(G_a o u) = 1/2 int (1 - |a|^2)^2 / |u + a|^4 |du|^2`` by quadrature.

    ``|du|^2`` is the per-triangle energy density of the PL map and the
    conformal weight is integrated with the seven-point rule at the
    normalized PL values; ``G_a`` is never differentiated.
    """
    a = np.asarray(a.a if isinstance(a, MoebiusParam) else a, dtype=float)
    if np.linalg.norm(a) >= 1.0:
        raise InvalidInputError(f"|a| = {np.linalg.norm(a)} must be < 1")
    mesh = u.mesh
    e = triangle_gradient_sq(mesh, u.values)
    if not np.any(a):
        return 0.5 * float(np.sum(e * mesh.triangle_areas))
    Y = _interp_at_nodes(mesh, u.values)
    wgt = (1.0 - a @ a) ** 2 / np.sum((Y + a) ** 2, axis=2) ** 2
    return 0.5 * float(np.sum(e * mesh.triangle_areas * (wgt @ TRI7_WEIGHTS)))


@dataclass
class HessianResult:
    moment_form: float      # 4 int (3<v,F>^2 - |v|^2) |dF|^2
    normal_form: float      # -4 int |v_perp|^2 |dF|^2
    discrepancy: float      # |difference| / (4 int |dF|^2)
    harmonic: bool
    harmonicity_residual: float


def _normal_components(u, v):
    """``|v_perp|^2`` at quadrature nodes: remove the radial and image-tangent parts of ``v``."""
    mesh = u.mesh
    P = u.values[mesh.triangles]                # (F, 3, n)
    Y = _interp_at_nodes(mesh, u.values)        # (F, q, n)
    e1 = P[:, 1] - P[:, 0]
    e2 = P[:, 2] - P[:, 0]
    out = np.empty(Y.shape[:2])
    for q in range(Y.shape[1]):
        y = Y[:, q]
        t1 = e1 - np.einsum("fc,fc->f", e1, y)[:, None] * y
        t2 = e2 - np.einsum("fc,fc->f", e2, y)[:, None] * y
        t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
        t2 = t2 - np.einsum("fc,fc->f", t2, t1)[:, None] * t1
        t2 /= np.linalg.norm(t2, axis=1, keepdims=True)
        w = v[None, :] - np.einsum("fc,c->f", y, v)[:, None] * y
        w = w - np.einsum("fc,fc->f", w, t1)[:, None] * t1 - np.einsum("fc,fc->f", w, t2)[:, None] * t2
        out[:, q] = np.einsum("fc,fc->f", w, w)
    return out


def hessian_H0(u: SphereValuedMap, v, harmonic_tol: float = 1e-2) -> HessianResult:
    """Second variation of ``a -> E(G_a o u)`` at ``a = 0`` in the unit direction ``v``.

    Returns both the moment form and the normal-bundle form; for harmonic
    ``u`` they agree in the continuum.  Harmonicity is judged by the largest
    conservation-law residual relative to ``sqrt(E)``.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (u.values.shape[1],):
        raise InvalidInputError("direction must live in the target Euclidean space")
    v = v / np.linalg.norm(v)
    mesh = u.mesh
    K = assemble_stiffness(mesh)
    e = triangle_gradient_sq(mesh, u.values)
    s = u.values @ v
    Mw = weighted_mass(mesh, triangle_weight=e)
    total = float(np.sum(e * mesh.triangle_areas))
    moment = 4.0 * (3.0 * float(s @ (Mw @ s)) - total)
    vp = _normal_components(u, v)
    normal = -4.0 * float(np.sum(e * mesh.triangle_areas * (vp @ TRI7_WEIGHTS)))
    # both forms are bounded by 4 int |dF|^2, the natural scale (one of them may vanish)
    disc = abs(moment - normal) / max(4.0 * total, 1e-300)
    energy = max(dirichlet_energy(mesh, u.values, K), 1e-300)
    hres = float(conservation_residual(u, K).max() / np.sqrt(energy))
    return HessianResult(moment, normal, float(disc), hres <= harmonic_tol, hres)
