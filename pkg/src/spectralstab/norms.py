"""Dual norms of signed measures on meshes.

The W^{-1,2} norm is the exact dual of the finite element W^{1,2} norm.  The
(C^0 cap W^{1,2})^*, (C^1)^* and log-Orlicz dual norms are infinite
dimensional suprema; they are reported as lower bounds over explicit
dictionaries of test functions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import linprog, minimize_scalar
from scipy.special import eval_legendre

from .errors import CapacityError, InvalidInputError, NumericalError, UnsupportedTopologyError
from .fem import assemble_mass, assemble_stiffness, triangle_gradient_sq
from .measure import MeasureOnMesh, hat_pairing, pushforward_hat_pairing, quadrature_nodes
from .mesh import SurfaceMesh, geodesic_distance
from .quadrature import TRI7_BARY, TRI7_WEIGHTS
from .spherical import apply_moebius

WASSERSTEIN_MAX_POINTS = 400


# ------------------------------------------------------------- functional
@dataclass(frozen=True, eq=False)
class SignedMeasureFunctional:
    """Signed measure ``mu - nu`` seen through its pairings.

    Attributes
    ----------
    mesh : SurfaceMesh
    m : ndarray, shape (V,)
        ``m_i = int phi_i d(mu - nu)`` for the hat basis.
    points, weights : ndarray
        Point representation (quadrature nodes on the unit sphere and signed
        weights) used to pair with closed-form test functions; ``None`` when
        only the hat pairing is known.
    """

    mesh: SurfaceMesh
    m: np.ndarray
    points: np.ndarray | None = None
    weights: np.ndarray | None = None
    label: str = ""

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.shape != (self.mesh.n_vertices,):
            raise InvalidInputError("pairing vector must have one entry per vertex")
        object.__setattr__(self, "m", m)

    @property
    def total(self) -> float:
        """Pairing with the constant function one."""
        return float(self.m.sum())

    def pair(self, psi) -> float:
        """``int psi d(mu - nu)``: vertex values use ``m``, callables the point representation."""
        if callable(psi):
            if self.points is None:
                raise InvalidInputError("this functional has no point representation")
            return float(self.weights @ psi(self.points))
        return float(self.m @ np.asarray(psi, dtype=float))

    def _combine(self, other, sign):
        if other.mesh is not self.mesh:
            raise InvalidInputError("functionals live on different meshes")
        if self.points is None or other.points is None:
            pts = w = None
        else:
            pts = np.vstack([self.points, other.points])
            w = np.concatenate([self.weights, sign * other.weights])
        return SignedMeasureFunctional(self.mesh, self.m + sign * other.m, pts, w)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __mul__(self, c):
        c = float(c)
        w = None if self.weights is None else c * self.weights
        return SignedMeasureFunctional(self.mesh, c * self.m, self.points, w, self.label)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


def measure_functional(mesh: SurfaceMesh, mu: MeasureOnMesh | None = None, pushforward=None,
                       label: str = "") -> SignedMeasureFunctional:
    """Functional of a nonnegative measure (background area when ``mu`` is None).

    ``pushforward`` is an optional Moebius parameter ``a``; the functional
    then represents ``(G_a)_* mu`` on the same sphere mesh.
    """
    if mu is None:
        mu = MeasureOnMesh(np.ones(mesh.n_vertices))
    if pushforward is None:
        m = hat_pairing(mesh, mu)
    else:
        m = pushforward_hat_pairing(mesh, mu, pushforward)
    pts = w = None
    if mesh.is_sphere:
        pts, w = quadrature_nodes(mesh, mu)
        if pushforward is not None:
            pts = apply_moebius(pushforward, pts)
            pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return SignedMeasureFunctional(mesh, m, pts, w, label)


def atom_functional(mesh: SurfaceMesh, point, weight: float = 1.0) -> SignedMeasureFunctional:
    """``weight * delta_p`` for a point ``p`` of the unit sphere (hat pairing by barycentrics)."""
    from .measure import locate_on_sphere
    if not mesh.is_sphere:
        raise UnsupportedTopologyError("atoms at arbitrary points need a sphere mesh")
    p = np.asarray(point, dtype=float)
    p = p / np.linalg.norm(p)
    tri, bary = locate_on_sphere(mesh, p[None, :])
    m = np.zeros(mesh.n_vertices)
    m[mesh.triangles[tri[0]]] = weight * bary[0]
    return SignedMeasureFunctional(mesh, m, p[None, :], np.array([weight]), f"atom:{weight:g}")


def measure_minus_area(mesh: SurfaceMesh, mu: MeasureOnMesh, pushforward=None) -> SignedMeasureFunctional:
    """``mu - dv_g`` (or ``(G_a)_* mu - dv_g``)."""
    return measure_functional(mesh, mu, pushforward) - measure_functional(mesh)


# ------------------------------------------------------------- W^{-1,2}
@lru_cache(maxsize=8)
def _riesz_factor(mesh: SurfaceMesh):
    A = (assemble_stiffness(mesh) + assemble_mass(mesh)).tocsc()
    return A, spla.splu(A)


@dataclass
class NormReport:
    norm_name: str
    value: float
    bound_type: str               # "exact" or "lower"
    dictionary_spec: dict = field(default_factory=dict)
    argmax: str = ""

    def to_dict(self) -> dict:
        return {"norm_name": self.norm_name, "value": self.value, "bound_type": self.bound_type,
                "dictionary_spec": self.dictionary_spec, "argmax": self.argmax}


def riesz_representative(m: SignedMeasureFunctional) -> np.ndarray:
    """``f* = (K + M_g)^{-1} m``, the maximizer of the dual quotient."""
    A, lu = _riesz_factor(m.mesh)
    f = lu.solve(m.m)
    res = np.linalg.norm(A @ f - m.m)
    if res > 1e-10 * max(np.linalg.norm(m.m), 1e-300):
        f = f + lu.solve(m.m - A @ f)
        if np.linalg.norm(A @ f - m.m) > 1e-10 * np.linalg.norm(m.m):
            raise NumericalError("Riesz solve did not reach 1e-10 relative residual")
    return f


def w_minus12_norm(m: SignedMeasureFunctional) -> float:
    """``sqrt(m^T (K + M_g)^{-1} m)``."""
    if not np.any(m.m):
        return 0.0
    f = riesz_representative(m)
    return float(np.sqrt(max(m.m @ f, 0.0)))


# ------------------------------------------------------ test dictionaries
@dataclass(frozen=True)
class Dictionary:
    """Test functions for dual-norm lower bounds.

    Zonal harmonics ``P_l(<p, x>)`` for ``0 <= l <= degree`` and smooth
    bumps ``cos^2(pi d / 2w)`` of geodesic radius ``w``, both centered at
    each point of ``centers`` (unit vectors) and used with both signs.
    """

    degree: int = 8
    centers: tuple = ()
    bump_widths: tuple = (0.5, 0.25, 0.125)

    def spec(self) -> dict:
        return {"degree": self.degree, "n_centers": len(self.centers), "bump_widths": list(self.bump_widths)}


def default_centers(n_level: int = 1, extra=()) -> tuple:
    """Vertices of an icosphere of the given level plus any extra points."""
    from .mesh import build_icosphere
    pts = [tuple(v) for v in build_icosphere(n_level).vertices]
    for p in extra:
        p = np.asarray(p, dtype=float)
        pts.append(tuple(p / np.linalg.norm(p)))
    return tuple(pts)


@lru_cache(maxsize=64)
def _legendre_grad_sup(l: int) -> float:
    """``max_theta |P_l'(cos theta)| sin theta``: the sup of the round gradient of a zonal harmonic."""
    if l == 0:
        return 0.0
    th = np.linspace(0.0, np.pi, 4000 * (l + 1) + 1)

    def g(t):
        x = np.cos(t)
        # P_l'(x)(1 - x^2) = l (P_{l-1}(x) - x P_l(x)), divided by sin(t)
        return np.abs(l * (eval_legendre(l - 1, x) - x * eval_legendre(l, x))) / np.maximum(np.sin(t), 1e-300)

    vals = g(th[1:-1])
    k = int(np.argmax(vals)) + 1
    res = minimize_scalar(lambda t: -g(t), bounds=(th[k - 1], th[k + 1]), method="bounded",
                          options={"xatol": 1e-14})
    return float(max(vals.max(), -res.fun))


def _zonal(l, p):
    p = np.asarray(p)
    return lambda x: eval_legendre(l, np.clip(x @ p, -1.0, 1.0))


def _bump(p, w):
    p = np.asarray(p)
    def f(x):
        d = np.arccos(np.clip(x @ p, -1.0, 1.0))
        return np.where(d < w, np.cos(0.5 * np.pi * d / w) ** 2, 0.0)
    return f


def _dictionary_elements(d: Dictionary):
    for p in d.centers:
        for l in range(d.degree + 1):
            yield f"P{l}@{np.round(p, 4).tolist()}", _zonal(l, p), 1.0, _legendre_grad_sup(l)
        for w in d.bump_widths:
            if not 0 < w <= np.pi:
                raise InvalidInputError(f"bump width {w} outside (0, pi]")
            yield f"bump{w:g}@{np.round(p, 4).tolist()}", _bump(p, w), 1.0, 0.5 * np.pi / w


def dual_c1_norm_lb(m: SignedMeasureFunctional, degree: int = 8, dictionary: Dictionary | None = None) -> NormReport:
    """Lower bound of the (C^1(S^2))^* norm on the round unit sphere.

    ``max |<m, psi>| / (|psi|_{C^0} + |d psi|_{C^0})`` over zonal harmonics
    of degree at most ``degree`` and smooth bumps; both norms of every
    dictionary element are known in closed form (bumps) or by a
    one-dimensional maximization (harmonics).
    """
    if not m.mesh.is_sphere:
        raise UnsupportedTopologyError("(C^1)^* bounds are implemented on the sphere")
    d = dictionary or Dictionary(degree, default_centers())
    if dictionary is not None and degree != d.degree:
        d = Dictionary(degree, d.centers, d.bump_widths)
    best, arg = 0.0, ""
    if m.points is not None and len(m.points):
        for name, psi, sup0, sup1 in _dictionary_elements(d):
            val = abs(m.pair(psi)) / (sup0 + sup1)
            if val > best:
                best, arg = val, name
    return NormReport("(C^1)^*", float(best), "lower", d.spec(), arg)


def dual_c0w12_norm_lb(m: SignedMeasureFunctional, dictionary: Dictionary | None = None) -> NormReport:
    """Lower bound of the (C^0 cap W^{1,2})^* norm.

    ``max |<m, psi>| / sqrt(|psi|_inf^2 + psi^T K psi)`` with ``psi`` the PL
    interpolant of each dictionary element, so numerator and denominator are
    exact for the discrete test function.
    """
    mesh = m.mesh
    K = assemble_stiffness(mesh)
    if dictionary is None:
        dictionary = Dictionary(8, default_centers()) if mesh.is_sphere else None
    best, arg = 0.0, ""
    if dictionary is None:
        elements = _torus_dictionary(mesh)
    else:
        if not mesh.is_sphere:
            raise UnsupportedTopologyError("spherical dictionaries need a sphere mesh")
        elements = ((name, psi(mesh.vertices)) for name, psi, _, _ in _dictionary_elements(dictionary))
    for name, vals in elements:
        den = np.sqrt(np.max(np.abs(vals)) ** 2 + vals @ (K @ vals))
        if den == 0:
            continue
        val = abs(m.m @ vals) / den
        if val > best:
            best, arg = val, name
    spec = dictionary.spec() if dictionary is not None else {"fourier_modes": 4}
    return NormReport("(C^0 cap W^{1,2})^*", float(best), "lower", spec, arg)


def _torus_dictionary(mesh, modes: int = 4):
    """Fourier modes on the fractional coordinates of a flat torus."""
    frac = np.linalg.solve(mesh.lattice.basis.T, mesh.vertices.T).T if mesh.lattice is not None else mesh.vertices
    yield "const", np.ones(mesh.n_vertices)
    for j in range(-modes, modes + 1):
        for k in range(0, modes + 1):
            if k == 0 and j <= 0:
                continue
            ph = 2 * np.pi * (j * frac[:, 0] + k * frac[:, 1])
            yield f"cos({j},{k})", np.cos(ph)
            yield f"sin({j},{k})", np.sin(ph)


# ----------------------------------------------------------------- Orlicz
def _orlicz_phi(s):
    s = np.abs(s)
    return s * s / np.log(2.0 + s)


def _luxemburg(values, weights, tol=1e-10) -> float:
    """``inf {eta > 0 : sum w Phi(v / eta) <= 1}`` by bisection in log space."""
    values = np.abs(np.asarray(values, dtype=float))
    if not np.any(values):
        return 0.0
    l2 = float(np.sqrt(weights @ values ** 2))
    f = lambda eta: float(weights @ _orlicz_phi(values / eta)) - 1.0
    lo, hi = l2 / np.sqrt(np.log(2.0) + 10.0), 10.0 * l2
    while f(lo) < 0:
        lo /= 4.0
    while f(hi) > 0:
        hi *= 4.0
    a, b = np.log(lo), np.log(hi)
    while b - a > tol:
        mid = 0.5 * (a + b)
        if f(np.exp(mid)) > 0:
            a = mid
        else:
            b = mid
    return float(np.exp(b))


def orlicz_norm(mesh: SurfaceMesh, f, include_gradient: bool = True) -> float:
    """``L^2 (Log L)^{-1/2}`` Luxemburg norm of a PL function, plus that of ``|df|``.

    The function is integrated with the seven-point rule per triangle; the
    gradient is constant per triangle.
    """
    f = np.asarray(f, dtype=float)
    vals = np.einsum("qk,fk->fq", TRI7_BARY, f[mesh.triangles]).ravel()
    wts = (mesh.triangle_areas[:, None] * TRI7_WEIGHTS[None, :]).ravel()
    out = _luxemburg(vals, wts)
    if include_gradient:
        out += _luxemburg(np.sqrt(triangle_gradient_sq(mesh, f)), mesh.triangle_areas)
    return out


def concentrated_profile(mesh: SurfaceMesh, center, eps: float, radius: float) -> np.ndarray:
    """Truncated logarithm ``log(R / max(d, eps))_+`` in geodesic distance ``d`` (metric units)."""
    d = geodesic_distance(mesh, mesh.vertices, np.asarray(center, dtype=float))
    return np.log(radius / np.maximum(d, eps)).clip(min=0.0)


def orlicz_candidates(mesh: SurfaceMesh, eps_values, radii=(0.05, 0.1, 0.2), centers=None):
    """Concentrated log profiles around the given centers (both poles by default), summed over centers."""
    from .measure import POLES
    centers = POLES if centers is None else centers
    for e in eps_values:
        for R in radii:
            if e >= R:
                continue
            prof = sum(concentrated_profile(mesh, c, e, R) for c in centers)
            if np.any(prof):
                yield f"log_profile(eps={e:g},R={R:g})", prof


def orlicz_dual_lb(m: SignedMeasureFunctional, candidates) -> NormReport:
    """``sup_phi <m, phi^2> / |phi^2|`` over candidate vertex arrays ``phi``.

    ``phi^2`` is taken as the PL interpolant of the squared vertex values, so
    the pairing is exact.
    """
    best, arg, n = 0.0, "", 0
    for name, phi in candidates:
        n += 1
        w = np.asarray(phi, dtype=float) ** 2
        den = orlicz_norm(m.mesh, w)
        if den == 0:
            continue
        val = abs(m.m @ w) / den
        if val > best:
            best, arg = val, name
    return NormReport("(W^{1,2,-1/2})^*", float(best), "lower", {"n_candidates": n}, arg)


# -------------------------------------------------------------- Wasserstein
def vertex_atoms(mesh: SurfaceMesh, mu: MeasureOnMesh):
    """Atomize ``mu`` onto the vertices: unit-sphere positions and hat-pairing weights scaled to mass one.

    This is the transport-side counterpart of the FE pairing vector used by
    :func:`w_minus12_norm`.
    """
    if not mesh.is_sphere:
        raise UnsupportedTopologyError("vertex atomization is implemented on the sphere")
    w = hat_pairing(mesh, mu)
    total = w.sum()
    if total <= 0:
        raise InvalidInputError("measure has no mass")
    return mesh.vertices / np.linalg.norm(mesh.vertices, axis=1, keepdims=True), w / total


def wasserstein2_exact_small(x, a, y, b, metric_scale: float = 1.0) -> float:
    """Exact W_2 between atomic measures on a sphere by linear programming.

    Parameters
    ----------
    x, y : ndarray, shape (n, 3), (k, 3)
        Atom positions on the unit sphere.
    a, b : ndarray
        Nonnegative weights with equal unit total.
    metric_scale : float
        Radius of the sphere carrying the metric (geodesic distances scale).
    """
    x, y = np.atleast_2d(x), np.atleast_2d(y)
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if len(x) > WASSERSTEIN_MAX_POINTS or len(y) > WASSERSTEIN_MAX_POINTS:
        raise CapacityError(f"exact transport limited to {WASSERSTEIN_MAX_POINTS} support points per side")
    if np.any(a < 0) or np.any(b < 0):
        raise InvalidInputError("transport weights must be nonnegative")
    if abs(a.sum() - 1.0) > 1e-9 or abs(b.sum() - 1.0) > 1e-9:
        raise InvalidInputError("both measures must have unit mass")
    C = (metric_scale * np.arccos(np.clip(x @ y.T, -1.0, 1.0))) ** 2
    n, k = C.shape
    rows = sp.kron(sp.eye(n), np.ones((1, k)))
    cols = sp.kron(np.ones((1, n)), sp.eye(k))
    A = sp.vstack([rows, cols]).tocsr()
    rhs = np.concatenate([a, b / b.sum() * a.sum()])
    res = linprog(C.ravel(), A_eq=A[:-1], b_eq=rhs[:-1], bounds=(0, None), method="highs")
    if res.status != 0:
        raise NumericalError(f"transport LP failed: {res.message}")
    return float(np.sqrt(max(res.fun, 0.0)))


__all__ = [
    "SignedMeasureFunctional", "measure_functional", "atom_functional", "measure_minus_area",
    "w_minus12_norm", "riesz_representative", "NormReport", "Dictionary", "default_centers",
    "dual_c1_norm_lb", "dual_c0w12_norm_lb", "orlicz_norm", "orlicz_dual_lb", "orlicz_candidates",
    "concentrated_profile", "wasserstein2_exact_small", "vertex_atoms",
]
