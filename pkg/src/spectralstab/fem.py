"""P1 finite element operators: cotangent stiffness, measure-weighted mass, energies."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError, InvalidInputError
from .mesh import SurfaceMesh


def _edge_frames(P):
    """Edge vectors opposite each corner and twice the triangle area."""
    e0 = P[:, 2] - P[:, 1]
    e1 = P[:, 0] - P[:, 2]
    e2 = P[:, 1] - P[:, 0]
    a, b = e2, -e1
    aa = np.einsum("ij,ij->i", a, a)
    bb = np.einsum("ij,ij->i", b, b)
    ab = np.einsum("ij,ij->i", a, b)
    twice_area = np.sqrt(np.maximum(aa * bb - ab * ab, 0.0))
    return (e0, e1, e2), twice_area


def cotangents(P: np.ndarray) -> np.ndarray:
    """Cotangents of the three interior angles of each triangle, shape (F, 3).

    Works for triangles embedded in any ambient dimension.
    """
    (e0, e1, e2), twice_area = _edge_frames(P)
    bad = np.flatnonzero(twice_area <= 0)
    if len(bad):
        raise AssemblyError(f"degenerate triangle {int(bad[0])} (zero area)")
    # angle at corner k is between the two edges leaving it
    c0 = -np.einsum("ij,ij->i", e1, e2) / twice_area
    c1 = -np.einsum("ij,ij->i", e2, e0) / twice_area
    c2 = -np.einsum("ij,ij->i", e0, e1) / twice_area
    return np.column_stack([c0, c1, c2])


def stiffness_from_corners(P: np.ndarray, triangles: np.ndarray, n: int) -> sp.csr_matrix:
    """Cotangent stiffness for given per-triangle corner coordinates."""
    cot = cotangents(P)
    t = triangles
    # corner k is opposite the edge (k+1, k+2)
    i = np.concatenate([t[:, 1], t[:, 2], t[:, 0]])
    j = np.concatenate([t[:, 2], t[:, 0], t[:, 1]])
    w = 0.5 * np.concatenate([cot[:, 0], cot[:, 1], cot[:, 2]])
    rows = np.concatenate([i, j, i, j])
    cols = np.concatenate([j, i, i, j])
    vals = np.concatenate([-w, -w, w, w])
    K = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    K.sum_duplicates()
    return K


def assemble_stiffness(mesh: SurfaceMesh) -> sp.csr_matrix:
    """Cotangent stiffness matrix ``K_ij = -(cot a_ij + cot b_ij) / 2``.

    Obtuse angles keep their negative weights; nothing is clamped.
    """
    return stiffness_from_corners(mesh.corners, mesh.triangles, mesh.n_vertices)


def _mass_entries(areas, triangles, rho=None, tri_weight=None):
    """Local consistent mass entries for a PL density times a per-triangle weight.

    Uses the exact integrals of products of three barycentric coordinates:
    ``A/10`` (iii), ``A/30`` (iij) and ``A/60`` (ijk).
    """
    A = areas if tri_weight is None else areas * tri_weight
    t = triangles
    if rho is None:
        diag = np.repeat(A[:, None] / 6.0, 3, axis=1)
        off = np.repeat(A[:, None] / 12.0, 3, axis=1)
    else:
        r = rho[t]
        s = r.sum(axis=1, keepdims=True)
        diag = A[:, None] * (r / 10.0 + (s - r) / 30.0)
        # off-diagonal entry for the pair opposite corner k
        off = A[:, None] * ((s - r) / 30.0 + r / 60.0)
    return diag, off


def weighted_mass(mesh: SurfaceMesh, vertex_density=None, triangle_weight=None) -> sp.csr_matrix:
    """Consistent mass matrix for ``int f g rho w dv`` with PL ``rho`` and piecewise constant ``w``."""
    t = mesh.triangles
    n = mesh.n_vertices
    rho = None if vertex_density is None else np.asarray(vertex_density, dtype=float)
    diag, off = _mass_entries(mesh.triangle_areas, t, rho, triangle_weight)
    i = np.concatenate([t[:, 1], t[:, 2], t[:, 0]])
    j = np.concatenate([t[:, 2], t[:, 0], t[:, 1]])
    o = np.concatenate([off[:, 0], off[:, 1], off[:, 2]])
    rows = np.concatenate([t.ravel(), i, j])
    cols = np.concatenate([t.ravel(), j, i])
    vals = np.concatenate([diag.ravel(), o, o])
    M = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    M.sum_duplicates()
    return M


def assemble_mass(mesh: SurfaceMesh, measure=None) -> sp.csr_matrix:
    """Mass matrix of a measure: consistent PL-density part plus diagonal atoms.

    Parameters
    ----------
    mesh : SurfaceMesh
    measure : MeasureOnMesh, optional
        Defaults to the background area measure ``dv_g``.
    """
    if measure is None:
        return weighted_mass(mesh)
    density = np.asarray(measure.density, dtype=float)
    if density.shape != (mesh.n_vertices,):
        raise InvalidInputError(f"density has {density.shape} entries, mesh has {mesh.n_vertices} vertices")
    if np.any(density < 0):
        raise InvalidInputError("negative density")
    M = weighted_mass(mesh, density) if np.any(density) else sp.csr_matrix((mesh.n_vertices,) * 2)
    if measure.atoms:
        idx = np.array([v for v, _ in measure.atoms], dtype=np.int64)
        w = np.array([w for _, w in measure.atoms], dtype=float)
        M = M + sp.coo_matrix((w, (idx, idx)), shape=M.shape).tocsr()
    return M.tocsr()


def lumped_mass(mesh: SurfaceMesh) -> np.ndarray:
    """Row-sum lumped background mass (barycentric vertex areas)."""
    return mesh.vertex_areas.copy()


def _as_components(u, n):
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if u.shape[0] != n:
        raise InvalidInputError(f"function has {u.shape[0]} rows, mesh has {n} vertices")
    return u


def dirichlet_energy(mesh: SurfaceMesh, u, K=None) -> float:
    """``E(u) = 1/2 sum_c u_c^T K u_c`` for scalar or vector valued PL ``u``."""
    u = _as_components(u, mesh.n_vertices)
    if K is None:
        K = assemble_stiffness(mesh)
    return 0.5 * float(np.einsum("ic,ic->", u, K @ u))


def triangle_gradient_sq(mesh: SurfaceMesh, u, corners=None) -> np.ndarray:
    """Per-triangle ``|du|^2`` (summed over components) of a PL map.

    The gradient is taken in the background metric; the formula
    ``df^T G^{-1} df`` with the edge Gram matrix ``G`` works in any
    ambient dimension.
    """
    u = _as_components(u, mesh.n_vertices)
    P = mesh.corners if corners is None else corners
    a = P[:, 1] - P[:, 0]
    b = P[:, 2] - P[:, 0]
    aa = np.einsum("ij,ij->i", a, a)
    bb = np.einsum("ij,ij->i", b, b)
    ab = np.einsum("ij,ij->i", a, b)
    det = aa * bb - ab * ab
    U = u[mesh.triangles]  # (F, 3, ncomp)
    d1 = U[:, 1] - U[:, 0]
    d2 = U[:, 2] - U[:, 0]
    q = (bb[:, None] * d1 * d1 - 2 * ab[:, None] * d1 * d2 + aa[:, None] * d2 * d2) / det[:, None]
    return q.sum(axis=1)


def export_coo(M: sp.spmatrix, path) -> None:
    """Write a sparse operator as ``row col value`` lines (0-based) for external checks."""
    C = sp.coo_matrix(M)
    order = np.lexsort((C.col, C.row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {C.shape[0]} {C.shape[1]} {C.nnz}\n")
        for r, c, v in zip(C.row[order], C.col[order], C.data[order]):
            fh.write(f"{r} {c} {v:.17g}\n")


def load_coo(path) -> sp.csr_matrix:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().lstrip("#").split()
        n, m = int(header[0]), int(header[1])
        data = np.loadtxt(fh, ndmin=2)
    if data.size == 0:
        return sp.csr_matrix((n, m))
    return sp.coo_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(n, m)).tocsr()
