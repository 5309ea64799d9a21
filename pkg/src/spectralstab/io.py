"""JSON persistence for meshes, measures, maps and spectral results.

Files are plain JSON objects.  Meshes carry ``{topology, lattice?, scale,
vertices, triangles}``; measures carry ``{mesh_ref, density, atoms,
normalization}`` where ``mesh_ref`` is either a mesh spec string such as
``icosphere:5`` or a path to a mesh file (relative to the measure file).
Floats are written with full ``repr`` precision so round trips are exact.
"""
from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .maps import SphereValuedMap
from .measure import MeasureOnMesh
from .mesh import LatticeSpec, SurfaceMesh, parse_mesh_spec


class MissingFileError(InvalidInputError):
    """A referenced input file does not exist."""

    def __init__(self, path):
        super().__init__(f"file not found: {path}")
        self.path = str(path)


def read_json(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise MissingFileError(p)
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{p}: malformed JSON ({exc})") from None
    if not isinstance(data, dict):
        raise InvalidInputError(f"{p}: top level must be an object")
    return data


def write_json(path, data: dict) -> Path:
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return p


# -------------------------------------------------------------------- mesh
def mesh_to_dict(mesh: SurfaceMesh) -> dict:
    d = {"topology": mesh.topology, "scale": mesh.scale, "vertices": mesh.vertices.tolist(),
         "triangles": mesh.triangles.tolist(), "label": mesh.label}
    if mesh.lattice is not None:
        d["lattice"] = {"c": mesh.lattice.c, "d": mesh.lattice.d}
    return d


def mesh_from_dict(d: dict) -> SurfaceMesh:
    """Rebuild and validate a mesh; any broken invariant raises InvalidInputError."""
    try:
        lat = d.get("lattice")
        lattice = LatticeSpec(float(lat["c"]), float(lat["d"])) if lat else None
        mesh = SurfaceMesh(str(d["topology"]), np.asarray(d["vertices"], dtype=float),
                           np.asarray(d["triangles"], dtype=np.int64), lattice,
                           float(d.get("scale", 1.0)), str(d.get("label", "")))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidInputError):
            raise
        raise InvalidInputError(f"malformed mesh document: {exc}") from None
    if mesh.vertices.ndim != 2:
        raise InvalidInputError("vertices must be a list of points")
    return mesh.validate()


def save_mesh(mesh: SurfaceMesh, path) -> Path:
    return write_json(path, mesh_to_dict(mesh))


def load_mesh(path) -> SurfaceMesh:
    return mesh_from_dict(read_json(path))


def resolve_mesh(ref: str, base_dir=None) -> SurfaceMesh:
    """Mesh from a spec string (``icosphere:5``) or from a mesh file path."""
    ref = str(ref)
    p = Path(ref)
    if not p.is_absolute() and base_dir is not None:
        p = Path(base_dir) / p
    if p.suffix.lower() == ".json" or p.is_file():
        return load_mesh(p)
    if os.sep in ref:
        raise MissingFileError(p)
    return parse_mesh_spec(ref)


# ----------------------------------------------------------------- measure
def measure_to_dict(mu: MeasureOnMesh, mesh_ref: str) -> dict:
    return {"mesh_ref": mesh_ref, "density": mu.density.tolist(),
            "atoms": [{"vertex": v, "weight": w} for v, w in mu.atoms],
            "normalization": mu.normalization, "label": mu.label}


def measure_from_dict(d: dict, mesh: SurfaceMesh | None = None) -> MeasureOnMesh:
    try:
        atoms = tuple((int(a["vertex"]), float(a["weight"])) for a in d.get("atoms", []))
        mu = MeasureOnMesh(np.asarray(d["density"], dtype=float), atoms, d.get("normalization"),
                           str(d.get("label", "")))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidInputError):
            raise
        raise InvalidInputError(f"malformed measure document: {exc}") from None
    if mesh is not None:
        mu.check_mesh(mesh)
    return mu


def save_measure(mu: MeasureOnMesh, mesh_ref: str, path) -> Path:
    return write_json(path, measure_to_dict(mu, mesh_ref))


def load_measure(path, mesh: SurfaceMesh | None = None):
    """Load a measure and its mesh; returns ``(mu, mesh)``."""
    d = read_json(path)
    if mesh is None:
        if "mesh_ref" not in d:
            raise InvalidInputError(f"{path}: measure file lacks mesh_ref")
        mesh = resolve_mesh(d["mesh_ref"], Path(path).parent)
    return measure_from_dict(d, mesh), mesh


# --------------------------------------------------------------------- map
def map_from_dict(d: dict, mesh: SurfaceMesh) -> SphereValuedMap:
    try:
        vals = np.asarray(d["values"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"malformed map document: {exc}") from None
    if vals.ndim != 2 or vals.shape[0] != mesh.n_vertices:
        raise InvalidInputError(f"map values have shape {vals.shape}, mesh has {mesh.n_vertices} vertices")
    if "target_dim" in d and int(d["target_dim"]) != vals.shape[1] - 1:
        raise InvalidInputError("target_dim does not match the value columns")
    return SphereValuedMap(mesh, vals, None, d.get("analytic_tag") or "")


def save_map(u: SphereValuedMap, path) -> Path:
    return write_json(path, u.to_dict())


def load_map(path, mesh: SurfaceMesh) -> SphereValuedMap:
    return map_from_dict(read_json(path), mesh)


__all__ = [
    "MissingFileError", "read_json", "write_json", "mesh_to_dict", "mesh_from_dict", "save_mesh",
    "load_mesh", "resolve_mesh", "measure_to_dict", "measure_from_dict", "save_measure",
    "load_measure", "map_from_dict", "save_map", "load_map",
]
