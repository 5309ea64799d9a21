"""Quadrature rules: symmetric triangle rules and graded Gauss-Legendre panels."""
import numpy as np

# Degree-5 seven-point symmetric rule (Dunavant); weights sum to one.
_A1, _B1 = 0.059715871789770, 0.470142064105115
_A2, _B2 = 0.797426985353087, 0.101286507323456
_W0, _W1, _W2 = 0.225, 0.132394152788506, 0.125939180544827

TRI7_BARY = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
    [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2],
])
TRI7_WEIGHTS = np.array([_W0, _W1, _W1, _W1, _W2, _W2, _W2])

# Three-point edge-midpoint rule, exact for quadratics.
TRI3_BARY = np.array([[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]])
TRI3_WEIGHTS = np.full(3, 1 / 3)


def graded_panels(center, lo, hi, ratio=0.5, min_width=1e-9, order=10):
    """Gauss-Legendre nodes on ``[lo, hi]`` graded geometrically toward ``center``.

    Panel widths shrink by ``ratio`` as they approach ``center`` until they
    fall below ``min_width``.  Returns ``(nodes, weights)``.
    """
    g, w = np.polynomial.legendre.leggauss(order)
    breaks = {lo, hi, center}
    for side in (lo, hi):
        span = side - center
        h = span
        while abs(h) > min_width:
            h *= ratio
            breaks.add(center + h)
    b = np.array(sorted(x for x in breaks if lo <= x <= hi))
    a0, a1 = b[:-1], b[1:]
    half = 0.5 * (a1 - a0)
    mid = 0.5 * (a1 + a0)
    nodes = (mid[:, None] + half[:, None] * g[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights
