import json

import numpy as np
import pytest

from spectralstab.errors import InvalidInputError
from spectralstab.io import (MissingFileError, load_map, load_measure, load_mesh, resolve_mesh, save_map,
                             save_measure, save_mesh)
from spectralstab.maps import identity_map, torus_eigenmap
from spectralstab.measure import MeasureOnMesh


def test_mesh_roundtrip_exact(tmp_path, ico3, square24):
    for m in (ico3, square24):
        p = save_mesh(m, tmp_path / f"{m.topology}.json")
        back = load_mesh(p)
        assert np.array_equal(back.vertices, m.vertices)
        assert np.array_equal(back.triangles, m.triangles)
        assert back.scale == m.scale and back.topology == m.topology


def test_measure_roundtrip_with_relative_mesh(tmp_path, ico3):
    save_mesh(ico3, tmp_path / "mesh.json")
    mu = MeasureOnMesh(1 + ico3.vertices[:, 0] ** 2, ((3, 0.5),))
    save_measure(mu, "mesh.json", tmp_path / "mu.json")
    back, mesh = load_measure(tmp_path / "mu.json")
    assert mesh.n_vertices == ico3.n_vertices
    assert np.array_equal(back.density, mu.density)
    assert back.atoms == mu.atoms


def test_measure_with_spec_reference(tmp_path):
    from spectralstab.mesh import parse_mesh_spec
    mesh = parse_mesh_spec("icosphere:2")
    save_measure(MeasureOnMesh(np.ones(mesh.n_vertices)), "icosphere:2", tmp_path / "mu.json")
    mu, m2 = load_measure(tmp_path / "mu.json")
    assert m2.n_vertices == mesh.n_vertices


def test_measure_wrong_mesh(tmp_path, ico3):
    save_measure(MeasureOnMesh(np.ones(10)), "icosphere:3", tmp_path / "mu.json")
    with pytest.raises(InvalidInputError):
        load_measure(tmp_path / "mu.json")


def test_map_roundtrip(tmp_path, ico3, square24):
    for u in (identity_map(ico3), torus_eigenmap(0.0, 1.0, square24)):
        p = save_map(u, tmp_path / "u.json")
        assert np.array_equal(load_map(p, u.mesh).values, u.values)
    with pytest.raises(InvalidInputError):
        load_map(p, ico3)


def test_missing_and_malformed(tmp_path):
    with pytest.raises(MissingFileError) as exc:
        load_mesh(tmp_path / "nope.json")
    assert "nope.json" in exc.value.path
    with pytest.raises(MissingFileError):
        resolve_mesh(str(tmp_path / "sub" / "m.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(InvalidInputError):
        load_mesh(bad)
    bad.write_text(json.dumps({"topology": "sphere", "vertices": [[0, 0, 1]], "triangles": [[0, 1, 2]]}))
    with pytest.raises(InvalidInputError):
        load_mesh(bad)


def test_resolve_spec_string():
    assert resolve_mesh("icosphere:1").n_vertices == 42
