"""Laplace eigenvalues of measures on surfaces and stability audits of isoperimetric eigenvalue bounds."""

__version__ = "0.1.0"
