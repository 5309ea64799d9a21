import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectralstab.eigen import eigen_of_measure
from spectralstab.errors import DegenerateMeasureError, InvalidInputError
from spectralstab.fem import dirichlet_energy
from spectralstab.maps import identity_map, torus_eigenmap
from spectralstab.measure import MeasureOnMesh, uniform_measure
from spectralstab.mesh import build_icosphere
from spectralstab.moebius import (canonical_family_energy, cap_reflection_energy, cap_reflection_map,
                                  center_of_mass_fn, hersch_balance, hessian_H0, nadirashvili_balance)
from spectralstab.spherical import (MoebiusParam, SphericalCap, apply_moebius, conformal_factor, image_cap,
                                    inverse_stereographic, stereographic)

ball = st.tuples(*[st.floats(-0.55, 0.55)] * 3)


@settings(max_examples=40, deadline=None)
@given(ball)
def test_moebius_preserves_sphere_and_inverts(a):
    x = build_icosphere(1).vertices
    y = apply_moebius(a, x)
    assert np.allclose(np.linalg.norm(y, axis=1), 1.0, atol=1e-12)
    back = apply_moebius(MoebiusParam(a).inverse(), y)
    assert np.allclose(back, x, atol=1e-8)


def test_moebius_fixes_identity_at_zero():
    x = build_icosphere(1).vertices
    assert np.allclose(apply_moebius((0.0, 0.0, 0.0), x), x)


def test_moebius_param_rejects_boundary():
    with pytest.raises(InvalidInputError):
        MoebiusParam((1.0, 0.0, 0.0))


def test_conformal_factor_integrates_to_area():
    m = build_icosphere(5)
    a = np.array([0.0, 0.3, 0.4])
    w = conformal_factor(a, m.vertices) ** 2
    assert np.sum(w * m.vertex_areas) == pytest.approx(4 * np.pi, rel=2e-3)


def test_stereographic_roundtrip():
    x = build_icosphere(2).vertices
    x = x[x[:, 2] > -0.9]
    assert np.allclose(inverse_stereographic(stereographic(x)), x, atol=1e-12)


def test_hersch_uniform_is_centered(ico3):
    b = hersch_balance(ico3, uniform_measure(ico3))
    assert np.linalg.norm(b.a.vector) < 1e-10


@pytest.mark.parametrize("method", ["quadrature", "interpolant"])
def test_hersch_hemisphere(ico4, method):
    mu = MeasureOnMesh((ico4.vertices[:, 2] > 0).astype(float))
    b = hersch_balance(ico4, mu, method=method)
    assert b.residual < 1e-9
    assert abs(b.a.a[0]) < 1e-8 and abs(b.a.a[1]) < 1e-8
    assert b.a.a[2] < -0.2
    assert np.linalg.norm(center_of_mass_fn(ico4, mu, method)(b.a.vector)) < 1e-9


def test_hersch_single_atom(ico3):
    mu = MeasureOnMesh(np.zeros(ico3.n_vertices), ((0, 1.0),))
    with pytest.raises(DegenerateMeasureError):
        hersch_balance(ico3, mu)


@pytest.mark.parametrize("radius", [np.pi / 6, np.pi / 3, np.pi / 2])
def test_cap_reflection_energy_identity(radius):
    m = build_icosphere(5)
    cap = SphericalCap((0.2, 0.3, 0.9), radius)
    u = cap_reflection_map(cap, m)
    assert 2 * u.energy() == pytest.approx(16 * np.pi - 4 * cap.area, rel=2e-2)
    assert cap_reflection_energy(cap) == pytest.approx(16 * np.pi - 4 * cap.area)


def test_image_cap_boundary():
    cap = SphericalCap((0.0, 0.6, 0.8), 0.7)
    a = np.array([0.1, -0.2, 0.3])
    Z = image_cap(a, cap)
    pts = apply_moebius(a, cap.boundary_points(32))
    d = np.arccos(np.clip(pts @ np.array(Z.center), -1, 1))
    assert np.allclose(d, Z.radius, atol=1e-9)


def test_nadirashvili_uniform_balanced(ico3):
    mu = uniform_measure(ico3)
    res = eigen_of_measure(ico3, mu, k=2)
    nb = nadirashvili_balance(ico3, mu, res.eigenvectors[:, 1])
    assert nb.status == "BALANCED"
    assert nb.cap.area <= 4 * np.pi - res.normalized[2] / 4 + 0.02 * 4 * np.pi
    assert nb.energy2 == pytest.approx(nb.energy2_formula, rel=5e-2)


def test_canonical_energy_at_zero_is_dirichlet(square24):
    F = torus_eigenmap(0.0, 1.0, square24)
    assert canonical_family_energy(F, np.zeros(4)) == pytest.approx(F.energy(), rel=1e-12)


def test_canonical_energy_dual_route(square48):
    # weighted-quadrature energy versus the energy of the composed vertex map
    F = torus_eigenmap(0.0, 1.0, square48)
    a = np.array([0.5, 0.0, 0.0, 0.0])
    ref = dirichlet_energy(square48, apply_moebius(a, F.values))
    assert canonical_family_energy(F, a) == pytest.approx(ref, rel=5e-3)


def test_canonical_energy_radially_decreasing(square48):
    F = torus_eigenmap(0.0, 1.0, square48)
    xi = np.array([0.3, -0.5, 0.1, 0.8])
    xi /= np.linalg.norm(xi)
    E = [canonical_family_energy(F, s * xi) for s in (0.0, 0.2, 0.4, 0.6, 0.8)]
    assert np.all(np.diff(E) < 0)


@pytest.mark.parametrize("i", range(4))
def test_hessian_clifford(square48, i):
    F = torus_eigenmap(0.0, 1.0, square48)
    h = hessian_H0(F, np.eye(4)[i])
    assert h.harmonic
    assert h.moment_form == pytest.approx(-4 * np.pi ** 2, rel=2e-2)
    assert h.normal_form == pytest.approx(-4 * np.pi ** 2, rel=2e-2)
    assert h.discrepancy < 2e-2


def test_hessian_identity_vanishes(ico4):
    h = hessian_H0(identity_map(ico4), [0.0, 0.0, 1.0])
    assert abs(h.moment_form) < 0.05 * 8 * np.pi
    assert h.discrepancy < 1e-2
