"""Randomized property suites."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectralstab.eigen import eigen_of_measure
from spectralstab.experiments import lemma21_rows, random_balanced_pair
from spectralstab.measure import MeasureOnMesh, total_mass
from spectralstab.mesh import build_icosphere, parse_mesh_spec
from spectralstab.norms import (SignedMeasureFunctional, measure_functional, orlicz_norm, vertex_atoms,
                                w_minus12_norm, wasserstein2_exact_small)

ICO2 = build_icosphere(2)
UNIT2 = parse_mesh_spec("unitsphere:2")
coef = st.floats(-1.5, 1.5, allow_nan=False)


def _density(mesh, c):
    X = mesh.vertices
    return np.exp(c[0] * X[:, 0] + c[1] * X[:, 1] * X[:, 2] + c[2] * X[:, 2] ** 2)


@settings(max_examples=25, deadline=None)
@given(st.tuples(coef, coef, coef), st.floats(1e-3, 1e3))
def test_eigenvalue_scale_invariance(c, scale):
    mu = MeasureOnMesh(_density(ICO2, c))
    a = eigen_of_measure(ICO2, mu, k=3).normalized
    b = eigen_of_measure(ICO2, mu.scaled(scale), k=3).normalized
    assert np.allclose(b, a, rtol=1e-10, atol=1e-10 * abs(a).max())


vec = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=ICO2.n_vertices, max_size=ICO2.n_vertices)


@settings(max_examples=50, deadline=None)
@given(vec, vec, st.floats(-1e3, 1e3, allow_nan=False))
def test_w_minus12_norm_axioms(x, y, t):
    mx = SignedMeasureFunctional(ICO2, np.array(x))
    my = SignedMeasureFunctional(ICO2, np.array(y))
    nx, ny = w_minus12_norm(mx), w_minus12_norm(my)
    scale = max(nx, ny, 1e-300)
    assert w_minus12_norm(t * mx) == pytest.approx(abs(t) * nx, rel=1e-8, abs=1e-8 * scale)
    assert w_minus12_norm(mx + my) <= nx + ny + 1e-8 * scale
    assert nx >= 0


@settings(max_examples=30, deadline=None)
@given(st.tuples(coef, coef, coef), st.floats(1e-3, 1e3))
def test_orlicz_homogeneity(c, t):
    f = _density(ICO2, c)
    assert orlicz_norm(ICO2, t * f) == pytest.approx(t * orlicz_norm(ICO2, f), rel=1e-8)


def _smooth_probability(mesh, rng):
    """``exp`` of a random quadratic with sup amplitude in ``[0.5, 2]``, normalized to mass one."""
    X = mesh.vertices
    c = rng.standard_normal(3)
    Q = rng.standard_normal((3, 3))
    g = X @ c + 0.5 * np.einsum("ij,jk,ik->i", X, Q + Q.T, X) / 2
    g = rng.uniform(0.5, 2.0) * g / np.abs(g).max()
    mu = MeasureOnMesh(np.exp(g))
    return mu.scaled(1.0 / total_mass(mu, mesh))


def test_wasserstein_lower_bound_random_instances():
    """``2 |mu - nu|_{W^-1,2} >= W_2(mu, nu)`` on 50 random pairs of unit-area measures.

    ``W_2`` is the exact transport cost between the vertex atomizations.
    Each instance must be resolved: nearest-neighbour hops, which cost at
    least ``h_min sqrt(TV / 2)`` on a vertex support, may not dominate ``W_2``.
    """
    mesh = UNIT2
    E = mesh.vertices[mesh.triangles]
    hmin = mesh.scale * np.min(np.linalg.norm(E[:, 1] - E[:, 0], axis=1))
    rng = np.random.default_rng(2024)
    violations = []
    for i in range(50):
        mu, nu = _smooth_probability(mesh, rng), _smooth_probability(mesh, rng)
        x, a = vertex_atoms(mesh, mu)
        y, b = vertex_atoms(mesh, nu)
        w2 = wasserstein2_exact_small(x, a, y, b, metric_scale=mesh.scale)
        n = w_minus12_norm(measure_functional(mesh, mu) - measure_functional(mesh, nu))
        assert hmin * np.sqrt(0.5 * np.abs(a - b).sum()) < 0.6 * w2, f"instance {i} is not resolved"
        if 2 * n < w2:
            violations.append((i, 2 * n, w2))
    assert violations == []


def test_lemma21_random_balanced_pairs():
    rng = np.random.default_rng(7)
    mesh = build_icosphere(3)
    violations = []
    for i in range(20):
        u, mu = random_balanced_pair(mesh, rng)
        d = lemma21_rows(u, mu, 1)
        if d["energy2"] - d["lambdabar"] < -d["defect_tol"]:
            violations.append((i, "energy", d["energy2"], d["lambdabar"]))
        if d["rhs_bound"] - d["lhs_norm"] < -d["norm_tol"]:
            violations.append((i, "norm", d["rhs_bound"], d["lhs_norm"]))
    assert violations == []
