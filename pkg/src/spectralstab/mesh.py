"""Triangulated round spheres and flat torus quotients.

Sphere meshes store unit vectors and use flat (chordal) triangles.  Torus
meshes store Cartesian coordinates inside the lattice cell spanned by
``(1, 0)`` and ``(c, d)``; periodicity lives purely in the triangle index
lists, and per-triangle corner coordinates are recovered by a minimum-image
unwrap in lattice coordinates.  A uniform metric scale factor ``scale``
multiplies all edge lengths, which is how unit-area rescalings are applied
without touching vertex coordinates or lattice parameters.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import CapacityError, InvalidInputError

SPHERE = "sphere"
TORUS = "torus"
MAX_SUBDIVISIONS = 9


@dataclass(frozen=True)
class LatticeSpec:
    """Lattice ``Z(1, 0) + Z(c, d)`` generating a flat torus.

    Parameters
    ----------
    c, d : float
        Shape parameters with ``0 <= c <= 1/2`` and ``d > 0``.
    rhombic_unit : bool
        If set, additionally require ``c**2 + d**2 == 1``.
    """

    c: float
    d: float
    rhombic_unit: bool = False

    def __post_init__(self):
        c, d = float(self.c), float(self.d)
        if not np.isfinite(c) or not np.isfinite(d):
            raise InvalidInputError(f"non-finite lattice parameters ({c}, {d})")
        if d <= 0:
            raise InvalidInputError(f"degenerate lattice: d = {d} must be positive")
        if not (-1e-12 <= c <= 0.5 + 1e-12):
            raise InvalidInputError(f"lattice parameter c = {c} outside [0, 1/2]")
        if self.rhombic_unit and abs(c * c + d * d - 1.0) > 1e-9:
            raise InvalidInputError(f"rhombic-unit lattice needs c^2 + d^2 = 1, got {c*c + d*d}")

    @property
    def basis(self) -> np.ndarray:
        """Rows are the two generators."""
        return np.array([[1.0, 0.0], [self.c, self.d]])

    @property
    def cell_area(self) -> float:
        return float(self.d)

    @classmethod
    def square(cls) -> "LatticeSpec":
        return cls(0.0, 1.0, rhombic_unit=True)

    @classmethod
    def equilateral(cls) -> "LatticeSpec":
        return cls(0.5, np.sqrt(3.0) / 2.0, rhombic_unit=True)


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    """Closed triangulated surface with its background flat-triangle metric.

    Attributes
    ----------
    topology : {"sphere", "torus"}
    vertices : ndarray, shape (V, 3) or (V, 2)
        Unit vectors on the sphere, or cell coordinates on the torus.
    triangles : ndarray of int, shape (F, 3)
        Counter-clockwise (outward) oriented index triples.
    lattice : LatticeSpec or None
    scale : float
        Metric length factor applied to all geometry.
    """

    topology: str
    vertices: np.ndarray
    triangles: np.ndarray
    lattice: LatticeSpec | None = None
    scale: float = 1.0
    label: str = field(default="", compare=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "scale", float(self.scale))

    # ------------------------------------------------------------------ sizes
    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def is_sphere(self) -> bool:
        return self.topology == SPHERE

    @property
    def is_torus(self) -> bool:
        return self.topology == TORUS

    # --------------------------------------------------------------- geometry
    @cached_property
    def corners(self) -> np.ndarray:
        """Per-triangle corner coordinates in metric units, shape (F, 3, dim)."""
        if self.is_sphere:
            P = self.vertices[self.triangles]
        else:
            B = self.lattice.basis
            frac = self.vertices @ np.linalg.inv(B)
            f = frac[self.triangles]
            delta = f - f[:, :1, :]
            delta -= np.round(delta)
            P = (f[:, :1, :] + delta) @ B
        P = self.scale * P
        P.setflags(write=False)
        return P

    @cached_property
    def triangle_areas(self) -> np.ndarray:
        P = self.corners
        a = P[:, 1] - P[:, 0]
        b = P[:, 2] - P[:, 0]
        aa = np.einsum("ij,ij->i", a, a)
        bb = np.einsum("ij,ij->i", b, b)
        ab = np.einsum("ij,ij->i", a, b)
        return 0.5 * np.sqrt(np.maximum(aa * bb - ab * ab, 0.0))

    @cached_property
    def vertex_areas(self) -> np.ndarray:
        """Barycentric (one third per incident triangle) vertex areas."""
        w = np.zeros(self.n_vertices)
        np.add.at(w, self.triangles.ravel(), np.repeat(self.triangle_areas / 3.0, 3))
        return w

    @property
    def total_area(self) -> float:
        return float(self.triangle_areas.sum())

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted index pairs, shape (E, 2)."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - len(self.edges) + self.n_triangles

    @cached_property
    def vertex_triangles(self) -> np.ndarray:
        """Padded incident-triangle table, shape (V, max_degree), -1 padded."""
        t = self.triangles.ravel()
        tri_id = np.repeat(np.arange(self.n_triangles), 3)
        order = np.argsort(t, kind="stable")
        t, tri_id = t[order], tri_id[order]
        counts = np.bincount(t, minlength=self.n_vertices)
        table = -np.ones((self.n_vertices, counts.max()), dtype=np.int64)
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        slot = np.arange(len(t)) - starts[t]
        table[t, slot] = tri_id
        return table

    def metric_positions(self) -> np.ndarray:
        """Vertex positions in metric units (cell coordinates on the torus)."""
        return self.scale * self.vertices

    # ------------------------------------------------------------- validation
    def validate(self) -> "SurfaceMesh":
        """Check all structural invariants; raise InvalidInputError on failure."""
        V = self.n_vertices
        t = self.triangles
        if self.topology not in (SPHERE, TORUS):
            raise InvalidInputError(f"unknown topology {self.topology!r}")
        if t.ndim != 2 or t.shape[1] != 3 or len(t) == 0:
            raise InvalidInputError("triangles must be a nonempty (F, 3) array")
        if t.min() < 0 or t.max() >= V:
            raise InvalidInputError("triangle index out of range")
        if np.any((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])):
            raise InvalidInputError("triangle with repeated vertex")
        if self.is_sphere:
            if self.vertices.shape[1] != 3:
                raise InvalidInputError("sphere vertices must be 3-vectors")
            if np.max(np.abs(np.linalg.norm(self.vertices, axis=1) - 1.0)) > 1e-12:
                raise InvalidInputError("sphere vertices must be unit vectors")
        else:
            if self.lattice is None:
                raise InvalidInputError("torus mesh requires a lattice")
            if self.vertices.shape[1] != 2:
                raise InvalidInputError("torus vertices must be 2-vectors")
        # each directed edge exactly once, and its reverse present: closed + oriented
        directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        key = directed[:, 0] * V + directed[:, 1]
        if len(np.unique(key)) != len(key):
            raise InvalidInputError("non-manifold or inconsistently oriented edge")
        rkey = np.sort(directed[:, 1] * V + directed[:, 0])
        if not np.array_equal(np.sort(key), rkey):
            raise InvalidInputError("mesh has boundary edges or inconsistent orientation")
        expected = 2 if self.is_sphere else 0
        if self.euler_characteristic != expected:
            raise InvalidInputError(
                f"Euler characteristic {self.euler_characteristic} != {expected} for {self.topology}")
        if np.any(self.triangle_areas <= 0):
            bad = int(np.argmin(self.triangle_areas))
            raise InvalidInputError(f"degenerate triangle {bad}")
        if self.is_sphere:
            # outward orientation
            P = self.vertices[t]
            n = np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
            if np.any(np.einsum("ij,ij->i", n, P.sum(axis=1)) <= 0):
                raise InvalidInputError("sphere triangles must be outward oriented")
        return self

    def with_scale(self, scale: float) -> "SurfaceMesh":
        return SurfaceMesh(self.topology, self.vertices, self.triangles, self.lattice, scale, self.label)


# ---------------------------------------------------------------- icosphere
def _icosahedron():
    """Icosahedron with vertices at both poles (pole-aligned orientation)."""
    z = 1.0 / np.sqrt(5.0)
    r = 2.0 / np.sqrt(5.0)
    k = np.arange(5)
    upper = np.column_stack([r * np.cos(2 * np.pi * k / 5), r * np.sin(2 * np.pi * k / 5), np.full(5, z)])
    lower = np.column_stack([r * np.cos(2 * np.pi * k / 5 + np.pi / 5),
                             r * np.sin(2 * np.pi * k / 5 + np.pi / 5), np.full(5, -z)])
    V = np.vstack([[0, 0, 1], upper, lower, [0, 0, -1]])
    U = lambda i: 1 + i % 5  # noqa: E731
    L = lambda i: 6 + i % 5  # noqa: E731
    F = []
    for i in range(5):
        F.append((0, U(i), U(i + 1)))
        F.append((U(i), L(i), U(i + 1)))
        F.append((U(i + 1), L(i), L(i + 1)))
        F.append((11, L(i + 1), L(i)))
    F = np.array(F)
    P = V[F]
    n = np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
    flip = np.einsum("ij,ij->i", n, P.sum(axis=1)) < 0
    F[flip] = F[flip][:, ::-1]
    return V, F


def _subdivide(V, F):
    """Loop-style 1-to-4 midpoint split, midpoints projected to the sphere."""
    e = np.concatenate([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]])
    e = np.sort(e, axis=1)
    uniq, inv = np.unique(e, axis=0, return_inverse=True)
    inv = inv.ravel()
    mid = V[uniq[:, 0]] + V[uniq[:, 1]]
    mid /= np.linalg.norm(mid, axis=1, keepdims=True)
    nF = len(F)
    m01 = len(V) + inv[:nF]
    m12 = len(V) + inv[nF:2 * nF]
    m20 = len(V) + inv[2 * nF:]
    a, b, c = F[:, 0], F[:, 1], F[:, 2]
    F2 = np.concatenate([
        np.column_stack([a, m01, m20]),
        np.column_stack([b, m12, m01]),
        np.column_stack([c, m20, m12]),
        np.column_stack([m01, m12, m20]),
    ])
    return np.vstack([V, mid]), F2


def build_icosphere(subdivisions: int, radius: float = 1.0) -> SurfaceMesh:
    """Subdivided icosahedron on the unit sphere.

    Parameters
    ----------
    subdivisions : int
        Number of 1-to-4 refinements, at most 9.
    radius : float
        Metric scale (sphere radius); vertices remain unit vectors.

    Returns
    -------
    SurfaceMesh
        ``10 * 4**s + 2`` vertices and ``20 * 4**s`` triangles.
    """
    s = int(subdivisions)
    if s != subdivisions or s < 0:
        raise InvalidInputError(f"subdivisions must be a nonnegative integer, got {subdivisions!r}")
    if s > MAX_SUBDIVISIONS:
        raise CapacityError(f"subdivisions={s} exceeds the memory guard of {MAX_SUBDIVISIONS}")
    V, F = _icosahedron()
    for _ in range(s):
        V, F = _subdivide(V, F)
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    return SurfaceMesh(SPHERE, V, F, None, radius, label=f"icosphere:{s}")


def build_unit_area_sphere(subdivisions: int) -> SurfaceMesh:
    """Icosphere rescaled so that its discrete (flat-triangle) area is exactly 1."""
    m = build_icosphere(subdivisions)
    return m.with_scale(1.0 / np.sqrt(m.total_area))


# -------------------------------------------------------------------- torus
def build_flat_torus(lattice: LatticeSpec, n: int, unit_area: bool = True) -> SurfaceMesh:
    """Structured ``n x n`` triangulation of the torus ``R^2 / lattice``.

    Vertex ``(i, j)`` sits at ``(i / n) * (1, 0) + (j / n) * (c, d)``.  Each
    lattice parallelogram is split along its ``(i, j)-(i+1, j+1)`` diagonal.
    With ``unit_area`` the metric is scaled by ``1 / sqrt(d)``.
    """
    if not isinstance(lattice, LatticeSpec):
        raise InvalidInputError("lattice must be a LatticeSpec")
    n = int(n)
    if n < 3:
        raise InvalidInputError(f"torus resolution n={n} must be at least 3")
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    i, j = i.ravel(), j.ravel()
    frac = np.column_stack([i, j]) / n
    V = frac @ lattice.basis
    idx = lambda a, b: (a % n) * n + (b % n)  # noqa: E731
    v00, v10, v11, v01 = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
    F = np.concatenate([np.column_stack([v00, v10, v11]), np.column_stack([v00, v11, v01])])
    scale = 1.0 / np.sqrt(lattice.cell_area) if unit_area else 1.0
    return SurfaceMesh(TORUS, V, F, lattice, scale, label=f"torus:{lattice.c:g},{lattice.d:g}:{n}")


def parse_mesh_spec(spec: str) -> SurfaceMesh:
    """Build a mesh from a short spec string.

    ``icosphere:L``, ``unitsphere:L`` (unit-area icosphere), ``torus:c,d:n``
    and the named tori ``torus:square:n`` / ``torus:equilateral:n``.
    """
    parts = spec.strip().split(":")
    kind = parts[0].lower()
    try:
        if kind == "icosphere" and len(parts) == 2:
            return build_icosphere(int(parts[1]))
        if kind == "unitsphere" and len(parts) == 2:
            return build_unit_area_sphere(int(parts[1]))
        if kind == "torus" and len(parts) == 3:
            shape = parts[1].lower()
            if shape == "square":
                lat = LatticeSpec.square()
            elif shape == "equilateral":
                lat = LatticeSpec.equilateral()
            else:
                c, d = (float(x) for x in shape.split(","))
                lat = LatticeSpec(c, d)
            return build_flat_torus(lat, int(parts[2]))
    except ValueError as exc:
        if isinstance(exc, InvalidInputError):
            raise
        raise InvalidInputError(f"cannot parse mesh spec {spec!r}: {exc}") from None
    raise InvalidInputError(f"unrecognized mesh spec {spec!r}")


def geodesic_distance(mesh: SurfaceMesh, x: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Great-circle distance (in metric units) on a sphere mesh from rows of x to p."""
    cosang = np.clip(np.asarray(x) @ np.asarray(p, dtype=float), -1.0, 1.0)
    return mesh.scale * np.arccos(cosang)
