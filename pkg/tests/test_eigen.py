import numpy as np
import pytest

from spectralstab.eigen import eigen_of_measure, normalized_eigenvalue, solve_generalized
from spectralstab.errors import InvalidInputError, RankDeficiencyError
from spectralstab.fem import assemble_mass, assemble_stiffness
from spectralstab.measure import MeasureOnMesh, uniform_measure
from spectralstab.mesh import LatticeSpec, build_flat_torus


def test_sphere_first_cluster(ico4):
    res = eigen_of_measure(ico4, None, k=8)
    lbar = res.normalized
    assert res.eigenvalues[0] == pytest.approx(0.0, abs=1e-9)
    assert lbar[1:4] == pytest.approx([8 * np.pi] * 3, rel=1e-2)
    # second cluster l = 2: lambda = 6, five-fold
    assert res.eigenvalues[4:9] == pytest.approx([6.0] * 5, rel=2e-2)


def test_eigenvectors_mass_orthonormal(ico3):
    mu = MeasureOnMesh(1 + ico3.vertices[:, 2] ** 2)
    res = eigen_of_measure(ico3, mu, k=4)
    M = assemble_mass(ico3, mu)
    G = res.eigenvectors.T @ (M @ res.eigenvectors)
    assert np.allclose(G, np.eye(5), atol=1e-8)
    assert res.residuals.max() < 1e-8


def test_dense_and_lanczos_agree(ico3):
    # dual route: dense eigh versus shift-inverted ARPACK on the same pencil
    mu = MeasureOnMesh(np.exp(ico3.vertices[:, 0]))
    K, M = assemble_stiffness(ico3), assemble_mass(ico3, mu)
    dense = solve_generalized(K, M, 5, dense_limit=10_000)
    sparse = solve_generalized(K, M, 5, dense_limit=0)
    assert sparse.eigenvalues == pytest.approx(dense.eigenvalues, rel=1e-8, abs=1e-10)


@pytest.mark.parametrize("lattice,expected", [(LatticeSpec.square(), 4 * np.pi ** 2),
                                              (LatticeSpec.equilateral(), 8 * np.pi ** 2 / np.sqrt(3))])
def test_torus_first_eigenvalue(lattice, expected):
    m = build_flat_torus(lattice, 48)
    assert eigen_of_measure(m, None, k=1).normalized[1] == pytest.approx(expected, rel=1e-2)


def test_atoms_only_rank(ico3):
    mu = MeasureOnMesh(np.zeros(ico3.n_vertices), ((0, 1.0), (5, 1.0)))
    with pytest.raises(RankDeficiencyError):
        eigen_of_measure(ico3, mu, k=3)


def test_atom_measure_with_density_is_solvable(ico3):
    mu = MeasureOnMesh(np.ones(ico3.n_vertices), ((0, 4 * np.pi),))
    res = eigen_of_measure(ico3, mu, k=2)
    assert np.all(np.diff(res.eigenvalues) >= -1e-10)
    assert res.residuals.max() < 1e-8


def test_scale_invariance(ico3):
    mu = MeasureOnMesh(1 + 0.5 * ico3.vertices[:, 1] ** 2)
    a = eigen_of_measure(ico3, mu, k=3).normalized
    b = eigen_of_measure(ico3, mu.scaled(7.3), k=3).normalized
    assert b == pytest.approx(a, rel=1e-10)


def test_k_validation(ico3):
    with pytest.raises(InvalidInputError):
        eigen_of_measure(ico3, None, k=0)
    res = eigen_of_measure(ico3, None, k=2)
    with pytest.raises(InvalidInputError):
        normalized_eigenvalue(res, 5)


def test_seed_determinism(ico4):
    mu = uniform_measure(ico4)
    a = eigen_of_measure(ico4, mu, k=3, seed=3, dense_limit=0)
    b = eigen_of_measure(ico4, mu, k=3, seed=3, dense_limit=0)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)


def test_to_dict_fields(ico3):
    d = eigen_of_measure(ico3, None, k=1).to_dict()
    assert set(d) >= {"lambdas", "mass", "normalized", "residuals"}
