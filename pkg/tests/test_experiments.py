import numpy as np
import pytest

from spectralstab.errors import InvalidInputError, PreconditionError
from spectralstab.experiments import (EXPERIMENTS, HERSCH_FAMILY, bubbling_family, canonical_audit,
                                      green_model_distance, hersch_stability_audit, hersch_terms,
                                      jacobi_audit, lemma21_audit, lemma21_rows, random_balanced_pair,
                                      robin_eigenvalue, robin_profile_integrals, run_experiment,
                                      sharpness_profile, w1inf_norm)
from spectralstab.maps import identity_map
from spectralstab.measure import MeasureOnMesh, density_from_function, uniform_measure
from spectralstab.reports import StabilityReport


@pytest.mark.parametrize("eps", [1e-2, 1e-3, 1e-4])
def test_robin_shooting_matches_bessel(eps):
    r = robin_eigenvalue(eps)
    assert r["lambda"] == pytest.approx(r["lambda_bessel"], rel=1e-9)


def test_robin_asymptotic_within_ten_percent():
    r = robin_eigenvalue(1e-4)
    assert abs(r["lambda"] / r["asymptotic"] - 1) < 0.1


@pytest.mark.parametrize("eps", [1e-2, 1e-4])
def test_robin_closed_forms(eps):
    d = robin_profile_integrals(eps)
    assert d["mass_quad"] == pytest.approx(d["mass"], rel=1e-10)
    assert d["energy_quad"] == pytest.approx(d["energy"], rel=1e-10)


def test_robin_eps_range():
    with pytest.raises(InvalidInputError):
        robin_eigenvalue(0.5)


def test_green_model_peak():
    M = 1.0
    L = np.linspace(2, 20, 2001)
    vals = [green_model_distance(np.exp(-x), M) for x in L]
    assert L[int(np.argmax(vals))] == pytest.approx(2 * np.pi * M + 2.64, abs=0.02)


def test_w1inf_constant_map(ico3):
    U = np.tile([0.0, 0.0, 1.0], (ico3.n_vertices, 1))
    assert w1inf_norm(ico3, U) == pytest.approx(1.0)
    # |id| = 1 and |d id| = sqrt(2) in the Frobenius norm
    assert w1inf_norm(ico3, ico3.vertices) == pytest.approx(1 + np.sqrt(2), rel=5e-2)


def test_lemma21_identity_equality_case(ico3):
    d = lemma21_rows(identity_map(ico3), uniform_measure(ico3), 1)
    assert d["energy2"] >= d["lambdabar"] - d["defect_tol"]
    assert d["energy2"] == pytest.approx(d["lambdabar"], rel=1e-2)


def test_lemma21_rejects_unbalanced(ico3):
    mu = MeasureOnMesh(np.exp(2 * ico3.vertices[:, 2]))
    with pytest.raises(PreconditionError, match="not balanced"):
        lemma21_rows(identity_map(ico3), mu, 1)


def test_lemma21_random_pair_passes(ico3):
    u, mu = random_balanced_pair(ico3, np.random.default_rng(4))
    rep = lemma21_audit(u, mu, 1)
    assert rep.passed, rep.failures()


def test_hersch_terms_uniform_vanishes(ico3):
    t = hersch_terms(ico3, uniform_measure(ico3))
    # the deficit is exact; the distance only carries the discrete lambda_1 != 2 rescaling
    assert abs(t["deficit"]) < 1e-10 and t["rhs"] < 1e-3


@pytest.mark.parametrize("name", list(HERSCH_FAMILY)[:3])
def test_hersch_single_family_member(name):
    rep = hersch_stability_audit(HERSCH_FAMILY[name], levels=(3, 4), label=name)
    assert rep.passed, rep.failures()


def test_hersch_fixed_measure(ico3):
    mu = density_from_function(ico3, HERSCH_FAMILY["bump"])
    rep = hersch_stability_audit(mu, ico3)
    assert rep.passed and rep.rows


@pytest.mark.parametrize("kind", ["prop72_restricted", "prop72_generic"])
def test_sharpness_profile_normalized(ico3, kind):
    h = sharpness_profile(ico3, kind)
    assert np.max(np.abs(h)) == pytest.approx(1.0)


def test_bubbling_family_weights(ico3):
    (mu,) = bubbling_family(ico3, fractions=(0.5,))
    v, w = mu.atoms[0]
    assert w == pytest.approx(2 * np.pi)
    assert ico3.vertices[v, 2] == pytest.approx(1.0)


def test_canonical_small():
    rep = canonical_audit(n=24, radii=(0.2, 0.5, 0.8), hessian_tol=0.05, n_random_dirs=1)
    assert rep.passed, rep.failures()


def test_jacobi_small():
    rep = jacobi_audit(n=48, torus_sizes=(12, 24), sphere_levels=(2, 3))
    assert rep.passed, rep.failures()


def test_registry():
    assert set(EXPERIMENTS) == {"lemma21", "hersch", "sharpness", "concentration", "robin", "bubbling",
                                "canonical", "jacobi", "density"}
    with pytest.raises(InvalidInputError, match="hersch"):
        run_experiment("nope")
    rep = run_experiment("robin", eps_grid=(1e-3,), sphere_level=None)
    assert isinstance(rep, StabilityReport) and rep.passed
