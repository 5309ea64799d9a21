import numpy as np
import pytest

from spectralstab.errors import CapacityError, InvalidInputError
from spectralstab.mesh import (LatticeSpec, SurfaceMesh, build_flat_torus, build_icosphere,
                               build_unit_area_sphere, geodesic_distance, parse_mesh_spec)


@pytest.mark.parametrize("level", [0, 1, 2, 3])
def test_icosphere_counts(level):
    m = build_icosphere(level)
    assert m.n_triangles == 20 * 4 ** level
    assert m.n_vertices == 10 * 4 ** level + 2
    assert m.euler_characteristic == 2
    m.validate()


def test_icosphere_area_converges():
    areas = [build_icosphere(l).total_area for l in range(1, 6)]
    assert np.all(np.diff(areas) > 0)
    assert areas[-1] == pytest.approx(4 * np.pi, rel=1e-3)


def test_icosphere_is_pole_aligned(ico3):
    z = ico3.vertices[:, 2]
    assert z.max() == pytest.approx(1.0, abs=1e-15)
    assert z.min() == pytest.approx(-1.0, abs=1e-15)


def test_icosphere_capacity():
    with pytest.raises(CapacityError):
        build_icosphere(10)


def test_unit_area_sphere():
    m = build_unit_area_sphere(3)
    assert m.total_area == pytest.approx(1.0, rel=1e-12)
    assert m.scale == pytest.approx(1 / np.sqrt(build_icosphere(3).total_area))


@pytest.mark.parametrize("lattice", [LatticeSpec.square(), LatticeSpec.equilateral(), LatticeSpec(0.3, 1.7)])
def test_torus_unit_area(lattice):
    m = build_flat_torus(lattice, 16)
    assert m.n_triangles == 2 * 16 ** 2
    assert m.euler_characteristic == 0
    assert m.total_area == pytest.approx(1.0, rel=1e-12)
    m.validate()


def test_square_torus_small():
    m = build_flat_torus(LatticeSpec(0, 1), 4)
    assert (m.n_vertices, m.n_triangles) == (16, 32)


def test_lattice_keeps_shape_parameters():
    m = build_flat_torus(LatticeSpec(0.5, np.sqrt(3) / 2), 8)
    assert m.lattice.c == 0.5 and m.lattice.d == pytest.approx(np.sqrt(3) / 2)


@pytest.mark.parametrize("c,d", [(0.0, 0.0), (0.7, 1.0), (0.2, -1.0), (np.nan, 1.0)])
def test_bad_lattice(c, d):
    with pytest.raises(InvalidInputError):
        LatticeSpec(c, d)


def test_validate_rejects_broken_orientation(ico3):
    t = ico3.triangles.copy()
    t[0] = t[0, [0, 2, 1]]
    with pytest.raises(InvalidInputError):
        SurfaceMesh("sphere", ico3.vertices, t).validate()


def test_validate_rejects_open_surface(ico3):
    with pytest.raises(InvalidInputError):
        SurfaceMesh("sphere", ico3.vertices, ico3.triangles[1:]).validate()


@pytest.mark.parametrize("spec,nv", [("icosphere:2", 162), ("unitsphere:1", 42), ("torus:0,1:8", 64),
                                     ("torus:square:4", 16), ("torus:equilateral:6", 36)])
def test_parse_mesh_spec(spec, nv):
    assert parse_mesh_spec(spec).n_vertices == nv


@pytest.mark.parametrize("spec", ["cube:3", "icosphere", "torus:a,b:4", ""])
def test_parse_mesh_spec_rejects(spec):
    with pytest.raises(InvalidInputError):
        parse_mesh_spec(spec)


def test_geodesic_distance_antipodal(ico3):
    n = np.array([0.0, 0.0, 1.0])
    d = geodesic_distance(ico3, ico3.vertices, n)
    assert d.max() == pytest.approx(np.pi)
    assert d.min() == pytest.approx(0.0, abs=1e-12)
