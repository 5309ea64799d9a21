"""Generalized eigenproblem ``K phi = lambda M_mu phi`` for measures.

Constants are deflated explicitly: the mass form is replaced by its
restriction to the ``M_mu``-orthogonal complement of constants.  The
remaining problem is solved for the largest ``theta`` of
``B x = theta (K + s M_mu) x``, which is well posed even when ``M_mu`` is
singular (atoms, vanishing density) because ``K + s M_mu`` is positive
definite as soon as the measure has positive mass.  Eigenvalues follow from
``lambda = 1 / theta - s``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvalidInputError, NumericalError, RankDeficiencyError

DEFAULT_TOL = 1e-8
DENSE_LIMIT = 800


@dataclass
class SpectralResult:
    """Eigenpairs ``lambda_0 = 0 <= lambda_1 <= ... <= lambda_k``.

    Attributes
    ----------
    eigenvalues : ndarray, shape (k+1,)
    eigenvectors : ndarray, shape (V, k+1)
        ``M_mu``-orthonormal columns; column 0 is the constant mode.
    residuals : ndarray
        Relative residuals ``|K phi - lambda M phi| / (|K phi| + lambda |M phi|)``.
    mass : float
        ``mu(M)``.
    normalization : str or None
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    mass: float
    normalization: str | None = None
    meta: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.eigenvalues) - 1

    @property
    def normalized(self) -> np.ndarray:
        return self.eigenvalues * self.mass

    def to_dict(self) -> dict:
        return {
            "lambdas": [float(x) for x in self.eigenvalues],
            "mass": float(self.mass),
            "normalized": [float(x) for x in self.normalized],
            "residuals": [float(x) for x in self.residuals],
            "normalization": self.normalization,
        }


def normalized_eigenvalue(result: SpectralResult, k: int) -> float:
    """``lambda_k * mu(M)``, invariant under scaling of the measure."""
    if not 0 <= k <= result.k:
        raise InvalidInputError(f"index {k} outside computed range 0..{result.k}")
    return float(result.eigenvalues[k] * result.mass)


def mass_rank(M) -> int:
    """Number of vertices carrying positive measure (rank of the mass form)."""
    return int(np.count_nonzero(M.diagonal() > 0))


def solve_generalized(K, M, k: int, *, tol: float = DEFAULT_TOL, seed: int = 0,
                      dense_limit: int = DENSE_LIMIT, normalization=None) -> SpectralResult:
    """Smallest ``k + 1`` eigenpairs of ``K phi = lambda M phi``.

    Parameters
    ----------
    K : sparse matrix
        Stiffness, PSD with constant kernel.
    M : sparse matrix
        Mass of the measure, PSD with rank greater than ``k``.
    k : int
        Number of nonzero eigenvalues wanted.
    seed : int
        Seed of the Lanczos start vector (results are deterministic for a
        fixed seed).
    """
    K = sp.csr_matrix(K)
    M = sp.csr_matrix(M)
    n = K.shape[0]
    if k < 1:
        raise InvalidInputError("k must be at least 1")
    rank = mass_rank(M)
    if rank <= k:
        raise RankDeficiencyError(
            f"mass operator has rank {rank} <= k = {k}; no {k + 1}-dimensional trial space exists")
    ones = np.ones(n)
    Mone = M @ ones
    mass = float(ones @ Mone)
    if not mass > 0:
        raise InvalidInputError("measure has nonpositive total mass")
    shift = 1.0 / mass
    A = (K + shift * M).tocsc()

    if n <= dense_limit or k + 2 >= n // 2:
        Ad = A.toarray()
        Bd = M.toarray() - np.outer(Mone, Mone) / mass
        theta, X = sla.eigh(Bd, Ad, subset_by_index=[n - k, n - 1])
    else:
        lu = spla.splu(A)
        Aop = spla.LinearOperator((n, n), matvec=lambda x: A @ x, dtype=float)
        Ainv = spla.LinearOperator((n, n), matvec=lu.solve, dtype=float)
        Bop = spla.LinearOperator(
            (n, n), matvec=lambda x: M @ x - Mone * ((Mone @ x) / mass), dtype=float)
        v0 = np.random.default_rng(seed).standard_normal(n)
        try:
            theta, X = spla.eigsh(Bop, k=k, M=Aop, Minv=Ainv, which="LA", v0=v0,
                                  tol=1e-13, ncv=min(n - 1, max(2 * k + 1, 24)), maxiter=20 * n)
        except spla.ArpackNoConvergence as exc:
            raise NumericalError(f"Lanczos did not converge: {exc}") from None

    order = np.argsort(-theta)
    theta, X = theta[order], X[:, order]
    if np.any(theta <= 0):
        raise RankDeficiencyError("fewer than k finite eigenvalues: measure support too small")
    lam = 1.0 / theta - shift
    lam = np.maximum(lam, 0.0)
    # x^T A x = 1  =>  x^T M x = theta
    X = X / np.sqrt(theta)[None, :]
    X = _m_orthonormalize(X, M, lam)
    phi0 = ones / np.sqrt(mass)
    vals = np.concatenate([[0.0], lam])
    vecs = np.column_stack([phi0, X])
    res = _residuals(K, M, vals, vecs)
    bad = np.flatnonzero(res[1:] > tol)
    if len(bad):
        vals, vecs, res = _refine(K, M, A, vals, vecs, shift)
        if np.any(res[1:] > tol):
            raise NumericalError(f"eigen-residuals {res[1:].max():.3e} above tolerance {tol:g}")
    return SpectralResult(vals, vecs, res, mass, normalization,
                          {"shift": shift, "rank": rank, "solver": "dense" if n <= dense_limit else "lanczos"})


def _m_orthonormalize(X, M, lam):
    """Orthonormalize within numerically degenerate clusters in the M inner product."""
    G = X.T @ (M @ X)
    L = np.linalg.cholesky(0.5 * (G + G.T))
    return np.linalg.solve(L, X.T).T


def _residuals(K, M, vals, vecs):
    KX = K @ vecs
    MX = M @ vecs
    num = np.linalg.norm(KX - MX * vals[None, :], axis=0)
    den = np.linalg.norm(KX, axis=0) + vals * np.linalg.norm(MX, axis=0)
    # the constant mode has lambda = 0 and K phi_0 = 0: measure against the operator scale
    scale = abs(K).sum(axis=1).max() * np.linalg.norm(vecs[:, 0])
    den[0] = max(den[0], scale)
    den = np.where(den > 0, den, 1.0)
    return num / den


def _refine(K, M, A, vals, vecs, shift, steps=3):
    """A few steps of shift-inverted subspace iteration plus Rayleigh-Ritz."""
    lu = spla.splu(sp.csc_matrix(A))
    X = vecs[:, 1:]
    Mone = M @ np.ones(K.shape[0])
    mass = Mone.sum()
    for _ in range(steps):
        Y = np.column_stack([lu.solve(M @ X[:, j]) for j in range(X.shape[1])])
        Y -= np.outer(np.ones(len(Y)), (Mone @ Y) / mass)
        Kr = Y.T @ (K @ Y)
        Mr = Y.T @ (M @ Y)
        w, Z = sla.eigh(0.5 * (Kr + Kr.T), 0.5 * (Mr + Mr.T))
        X = Y @ Z
    vals = np.concatenate([[0.0], np.maximum(w, 0.0)])
    vecs = np.column_stack([vecs[:, 0], X])
    return vals, vecs, _residuals(K, M, vals, vecs)


def eigen_of_measure(mesh, measure=None, k: int = 1, **kwargs) -> SpectralResult:
    """Assemble and solve for a measure on a mesh (uniform area measure by default)."""
    from .fem import assemble_mass, assemble_stiffness
    K = assemble_stiffness(mesh)
    M = assemble_mass(mesh, measure)
    norm = getattr(measure, "normalization", None)
    return solve_generalized(K, M, k, normalization=norm, **kwargs)
