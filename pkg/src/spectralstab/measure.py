"""Measures on meshes: piecewise-linear density plus vertex atoms.

Also hosts the concentrating cap measures and the lazy pushforward pairing
``int f d(G_a)_* mu = int f o G_a dmu`` evaluated by composition under a
degree-5 triangle rule.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidInputError, ResolutionError, UnsupportedTopologyError
from .mesh import SurfaceMesh, geodesic_distance
from .quadrature import TRI7_BARY, TRI7_WEIGHTS
from .spherical import MoebiusParam, apply_moebius

NORMALIZATIONS = (None, "unit_mass", "first_eigenvalue_two")


@dataclass(frozen=True, eq=False)
class MeasureOnMesh:
    """Radon measure ``rho dv_g + sum_i w_i delta_{v_i}`` on a mesh.

    Parameters
    ----------
    density : array_like, shape (V,)
        Nonnegative vertex values of the PL density.
    atoms : sequence of (vertex, weight)
        Dirac masses pinned to vertices, weights positive.
    normalization : {None, "unit_mass", "first_eigenvalue_two"}
        Bookkeeping tag stating which normalization was applied.
    """

    density: np.ndarray
    atoms: tuple = ()
    normalization: str | None = None
    label: str = field(default="", compare=False)

    def __post_init__(self):
        rho = np.array(self.density, dtype=float, copy=True)
        if rho.ndim != 1:
            raise InvalidInputError("density must be a 1-D vertex array")
        if not np.all(np.isfinite(rho)):
            raise InvalidInputError("density values must be finite")
        if np.any(rho < 0):
            raise InvalidInputError("density values must be nonnegative")
        atoms = tuple((int(v), float(w)) for v, w in self.atoms)
        for v, w in atoms:
            if not (np.isfinite(w) and w > 0):
                raise InvalidInputError(f"atom weight {w} must be positive")
            if not 0 <= v < len(rho):
                raise InvalidInputError(f"atom vertex {v} out of range")
        if self.normalization not in NORMALIZATIONS:
            raise InvalidInputError(f"unknown normalization {self.normalization!r}")
        rho.setflags(write=False)
        object.__setattr__(self, "density", rho)
        object.__setattr__(self, "atoms", atoms)
        if not np.any(rho > 0) and not atoms:
            raise InvalidInputError("measure has zero total mass")

    @property
    def atom_mass(self) -> float:
        return float(sum(w for _, w in self.atoms))

    def scaled(self, c: float, normalization=None) -> "MeasureOnMesh":
        if not c > 0:
            raise InvalidInputError("scale factor must be positive")
        return MeasureOnMesh(c * self.density, tuple((v, c * w) for v, w in self.atoms),
                             normalization, self.label)

    def check_mesh(self, mesh: SurfaceMesh):
        if len(self.density) != mesh.n_vertices:
            raise InvalidInputError(
                f"measure has {len(self.density)} vertex values, mesh has {mesh.n_vertices}")

    @property
    def is_single_atom(self) -> bool:
        return not np.any(self.density > 0) and len({v for v, _ in self.atoms}) == 1


def density_mass(mesh: SurfaceMesh, density) -> float:
    """Exact integral of a PL density: ``sum_T A_T (rho_i + rho_j + rho_k) / 3``."""
    rho = np.asarray(density, dtype=float)
    return float(mesh.triangle_areas @ rho[mesh.triangles].sum(axis=1) / 3.0)


def total_mass(mu: MeasureOnMesh, mesh: SurfaceMesh) -> float:
    """``mu(M)``: integral of the density plus the atom weights."""
    mu.check_mesh(mesh)
    return density_mass(mesh, mu.density) + mu.atom_mass


def uniform_measure(mesh: SurfaceMesh, normalization=None) -> MeasureOnMesh:
    return MeasureOnMesh(np.ones(mesh.n_vertices), (), normalization, "uniform")


def normalize_unit_mass(mu: MeasureOnMesh, mesh: SurfaceMesh) -> MeasureOnMesh:
    return mu.scaled(1.0 / total_mass(mu, mesh), "unit_mass")


def nearest_vertex(mesh: SurfaceMesh, point) -> int:
    """Index of the vertex closest to ``point`` (used to snap atoms)."""
    d = np.linalg.norm(mesh.vertices - np.asarray(point, dtype=float), axis=1)
    return int(np.argmin(d))


def density_from_function(mesh: SurfaceMesh, fn, normalization=None, label="") -> MeasureOnMesh:
    """Interpolate a nonnegative function of vertex positions as a PL density."""
    return MeasureOnMesh(np.asarray(fn(mesh.vertices), dtype=float), (), normalization, label)


# ------------------------------------------------------------ cap measures
MIN_CAP_VERTICES = 16


def _cap_indicator(mesh: SurfaceMesh, eps: float, centers) -> np.ndarray:
    ind = np.zeros(mesh.n_vertices)
    for c in centers:
        dist = geodesic_distance(mesh, mesh.vertices, c)
        inside = dist < eps
        if inside.sum() < MIN_CAP_VERTICES:
            eps_min = float(np.sort(dist)[MIN_CAP_VERTICES - 1]) * (1 + 1e-9)
            raise ResolutionError(
                f"cap of radius {eps:g} holds {int(inside.sum())} vertices; "
                f"this mesh needs eps >= {eps_min:.6g} for {MIN_CAP_VERTICES} vertices")
        ind[inside] = 1.0
    return ind


POLES = (np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, -1.0]))


def cap_area(mesh: SurfaceMesh, eps: float) -> float:
    """Exact area of a geodesic cap of radius ``eps`` on the sphere carrying the mesh metric."""
    R = mesh.scale
    return 2.0 * np.pi * R * R * (1.0 - np.cos(eps / R))


def cap_density(mesh: SurfaceMesh, eps: float) -> np.ndarray:
    """Density of ``nu_eps``: indicator of two polar caps over ``eps^2 log(1/eps)``.

    Each vertex-wise indicator is rescaled so that its discrete mass equals
    the exact cap area; the PL interpolant of a raw indicator overshoots by
    roughly one edge length around the rim, which dominates at small ``eps``.
    """
    if not mesh.is_sphere:
        raise UnsupportedTopologyError("cap measures live on the sphere")
    if not 0 < eps < 1:
        raise InvalidInputError(f"cap radius eps={eps} must lie in (0, 1)")
    exact = cap_area(mesh, eps)
    rho = np.zeros(mesh.n_vertices)
    for c in POLES:
        ind = _cap_indicator(mesh, eps, [c])
        rho += ind * (exact / density_mass(mesh, ind))
    return rho / (eps * eps * np.log(1.0 / eps))


def cap_concentration_measure(mesh: SurfaceMesh, eps: float, coupling: float) -> MeasureOnMesh:
    """Unit-mass measure ``(dv_g + M nu_eps) / (1 + M nu_eps(S^2))``.

    Normalization uses the discrete masses, so the result has mass one to
    rounding even when the mesh area differs slightly from one.
    """
    if coupling < 0:
        raise InvalidInputError("coupling M must be nonnegative")
    nu = cap_density(mesh, eps)
    rho = 1.0 + coupling * nu
    mass = density_mass(mesh, rho)
    return MeasureOnMesh(rho / mass, (), "unit_mass", f"cap:{eps:g},{coupling:g}")


# --------------------------------------------------------- point location
@dataclass(frozen=True, eq=False)
class _Locator:
    tree: cKDTree
    inv_corners: np.ndarray  # (F, 3, 3) inverse of the matrix of corner columns
    vertex_triangles: np.ndarray


@lru_cache(maxsize=8)
def _locator(mesh: SurfaceMesh) -> _Locator:
    P = mesh.vertices[mesh.triangles]  # unit-sphere corners, rows
    inv = np.linalg.inv(np.transpose(P, (0, 2, 1)))
    return _Locator(cKDTree(mesh.vertices), inv, mesh.vertex_triangles)


def locate_on_sphere(mesh: SurfaceMesh, y: np.ndarray, neighbours: int = 3, chunk: int = 8192):
    """Triangle and barycentric coordinates of the radial projection of each ``y``.

    A point lies in triangle ``T`` iff the coefficients ``w`` solving
    ``[p0 p1 p2] w = y`` are all nonnegative; barycentrics are ``w / sum(w)``.
    """
    loc = _locator(mesh)
    y = np.atleast_2d(np.asarray(y, dtype=float))
    tri = np.empty(len(y), dtype=np.int64)
    wb = np.empty((len(y), 3))
    for start in range(0, len(y), chunk):
        yc = y[start:start + chunk]
        _, nv = loc.tree.query(yc, k=neighbours)
        nv = np.asarray(nv).reshape(len(yc), -1)
        cand = loc.vertex_triangles[nv].reshape(len(yc), -1)
        valid = cand >= 0
        safe = np.where(valid, cand, 0)
        w = np.einsum("nkij,nj->nki", loc.inv_corners[safe], yc)
        score = np.where(valid, w.min(axis=2), -np.inf)
        best = np.argmax(score, axis=1)
        rows = np.arange(len(yc))
        tri[start:start + len(yc)] = safe[rows, best]
        wb[start:start + len(yc)] = w[rows, best]
        for m in np.flatnonzero(score[rows, best] < -1e-9):
            # rare miss: brute-force search over all triangles
            ww = np.einsum("kij,j->ki", loc.inv_corners, yc[m])
            k = int(np.argmax(ww.min(axis=1)))
            tri[start + m], wb[start + m] = k, ww[k]
    bary = wb / wb.sum(axis=1, keepdims=True)
    return tri, bary


def evaluate_fe(mesh: SurfaceMesh, values, y) -> np.ndarray:
    """Evaluate a PL function (vertex values) at points ``y`` on the unit sphere."""
    tri, bary = locate_on_sphere(mesh, y)
    vals = np.asarray(values, dtype=float)
    corner_vals = vals[mesh.triangles[tri]]
    if vals.ndim == 1:
        return np.einsum("ni,ni->n", bary, corner_vals)
    return np.einsum("ni,nic->nc", bary, corner_vals)


def quadrature_nodes(mesh: SurfaceMesh, mu: MeasureOnMesh):
    """Points on the unit sphere and weights integrating against ``mu``.

    Density part: seven-point rule per flat triangle, nodes projected
    radially.  Atom part: the atom vertices with their weights.
    """
    mu.check_mesh(mesh)
    P = mesh.vertices[mesh.triangles]
    X = np.einsum("qk,fkd->fqd", TRI7_BARY, P)
    rho = np.einsum("qk,fk->fq", TRI7_BARY, mu.density[mesh.triangles])
    W = mesh.triangle_areas[:, None] * TRI7_WEIGHTS[None, :] * rho
    keep = W.ravel() != 0
    X = X.reshape(-1, 3)[keep]
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    W = W.ravel()[keep]
    if mu.atoms:
        idx = np.array([v for v, _ in mu.atoms])
        X = np.vstack([X, mesh.vertices[idx]])
        W = np.concatenate([W, [w for _, w in mu.atoms]])
    # barycentric coordinates of the nodes in their own triangles are known,
    # but relocating keeps a single code path for every pushforward
    return X, W


def _require_sphere(mesh):
    if not mesh.is_sphere:
        raise UnsupportedTopologyError("pushforward by Moebius maps needs a sphere mesh")


def pair_with_pushforward(mesh: SurfaceMesh, mu: MeasureOnMesh, phi, f) -> np.ndarray:
    """``int f d(G_a)_* mu = int f(G_a(x)) dmu(x)``.

    Parameters
    ----------
    phi : MoebiusParam or array_like
    f : callable or array_like
        Either a function of points on the sphere (rows) or PL vertex values.
    """
    _require_sphere(mesh)
    X, W = quadrature_nodes(mesh, mu)
    Y = apply_moebius(phi, X)
    Y /= np.linalg.norm(Y, axis=1, keepdims=True)
    vals = f(Y) if callable(f) else evaluate_fe(mesh, f, Y)
    return np.tensordot(W, vals, axes=(0, 0))


def pushforward_hat_pairing(mesh: SurfaceMesh, mu: MeasureOnMesh, phi) -> np.ndarray:
    """Vector ``m_i = int phi_i o G_a dmu`` for all hat functions at once."""
    _require_sphere(mesh)
    X, W = quadrature_nodes(mesh, mu)
    Y = apply_moebius(phi, X)
    Y /= np.linalg.norm(Y, axis=1, keepdims=True)
    tri, bary = locate_on_sphere(mesh, Y)
    m = np.zeros(mesh.n_vertices)
    np.add.at(m, mesh.triangles[tri].ravel(), (bary * W[:, None]).ravel())
    return m


def hat_pairing(mesh: SurfaceMesh, mu: MeasureOnMesh) -> np.ndarray:
    """``m_i = int phi_i dmu`` computed exactly (row sums of the mass matrix)."""
    from .fem import assemble_mass
    return np.asarray(assemble_mass(mesh, mu).sum(axis=1)).ravel()


__all__ = [
    "MeasureOnMesh", "MoebiusParam", "total_mass", "uniform_measure", "normalize_unit_mass",
    "cap_density", "cap_concentration_measure", "pair_with_pushforward",
    "pushforward_hat_pairing", "hat_pairing", "density_mass", "locate_on_sphere", "evaluate_fe",
]
