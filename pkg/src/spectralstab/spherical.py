"""Point-level conformal geometry of the unit sphere.

The Moebius dilations ``G_a``, spherical caps, rotations and the conformal
reflection across a cap boundary.  Everything here is closed form and
vectorized over rows of points.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class MoebiusParam:
    """Parameter ``a`` of the dilation ``G_a``, a point in the open unit ball."""

    a: tuple

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).ravel()
        if not np.all(np.isfinite(a)):
            raise InvalidInputError("non-finite Moebius parameter")
        if np.linalg.norm(a) >= 1.0:
            raise InvalidInputError(f"Moebius parameter |a| = {np.linalg.norm(a)} must be < 1")
        object.__setattr__(self, "a", tuple(float(x) for x in a))

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.a)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.a))

    def inverse(self) -> "MoebiusParam":
        return MoebiusParam(tuple(-x for x in self.a))

    @classmethod
    def identity(cls, dim: int = 3) -> "MoebiusParam":
        return cls(tuple([0.0] * dim))


def _vec(a):
    if isinstance(a, MoebiusParam):
        return a.vector
    a = np.asarray(a, dtype=float)
    if np.linalg.norm(a) >= 1.0:
        raise InvalidInputError(f"Moebius parameter |a| = {np.linalg.norm(a)} must be < 1")
    return a


def apply_moebius(a, x) -> np.ndarray:
    """``G_a(x) = (1 - |a|^2)(x + a) / |x + a|^2 + a`` on rows of ``x``.

    ``G_a`` pushes mass toward ``a / |a|``; its inverse is ``G_{-a}``.
    """
    a = _vec(a)
    x = np.asarray(x, dtype=float)
    y = x + a
    s = 1.0 - a @ a
    return s * y / np.sum(y * y, axis=-1, keepdims=True) + a


def conformal_factor(a, x) -> np.ndarray:
    """Length dilation of ``G_a`` at ``x``: ``(1 - |a|^2) / |x + a|^2``."""
    a = _vec(a)
    y = np.asarray(x, dtype=float) + a
    return (1.0 - a @ a) / np.sum(y * y, axis=-1)


def rotation_to_north(p) -> np.ndarray:
    """Rotation matrix ``Q`` with ``Q @ p = e3`` (Rodrigues form)."""
    p = np.asarray(p, dtype=float)
    p = p / np.linalg.norm(p)
    e3 = np.array([0.0, 0.0, 1.0])
    c = p @ e3
    if c > 1 - 1e-15:
        return np.eye(3)
    if c < -1 + 1e-15:
        return np.diag([1.0, -1.0, -1.0])
    v = np.cross(p, e3)
    vx = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + vx + vx @ vx / (1.0 + c)


def stereographic(x) -> np.ndarray:
    """Projection from the south pole onto the equatorial plane."""
    x = np.asarray(x, dtype=float)
    return x[..., :2] / (1.0 + x[..., 2:3])


def inverse_stereographic(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    r2 = np.sum(z * z, axis=-1, keepdims=True)
    return np.concatenate([2 * z, 1.0 - r2], axis=-1) / (1.0 + r2)


@dataclass(frozen=True)
class SphericalCap:
    """Open geodesic ball ``{x : angle(x, center) < radius}`` on the unit sphere."""

    center: tuple
    radius: float

    def __post_init__(self):
        p = np.asarray(self.center, dtype=float).ravel()
        if p.shape != (3,) or not np.all(np.isfinite(p)) or np.linalg.norm(p) == 0:
            raise InvalidInputError("cap center must be a nonzero 3-vector")
        p = p / np.linalg.norm(p)
        r = float(self.radius)
        if not (0.0 < r < np.pi):
            raise InvalidInputError(f"cap radius {r} outside (0, pi)")
        object.__setattr__(self, "center", tuple(float(v) for v in p))
        object.__setattr__(self, "radius", r)

    @property
    def area(self) -> float:
        """Area on the curvature-one sphere: ``2 pi (1 - cos r)``."""
        return 2.0 * np.pi * (1.0 - np.cos(self.radius))

    def contains(self, x) -> np.ndarray:
        """Strict interior test; boundary points count as outside."""
        cosd = np.asarray(x, dtype=float) @ np.asarray(self.center)
        return np.arccos(np.clip(cosd, -1.0, 1.0)) < self.radius

    def boundary_points(self, n: int = 16) -> np.ndarray:
        Q = rotation_to_north(self.center)
        th = 2 * np.pi * np.arange(n) / n
        r = self.radius
        pts = np.column_stack([np.sin(r) * np.cos(th), np.sin(r) * np.sin(th), np.full(n, np.cos(r))])
        return pts @ Q  # Q^T applied to row vectors


def reflect_across_cap(cap: SphericalCap, x) -> np.ndarray:
    """Conformal reflection across the cap boundary, applied to every row of ``x``.

    Rotate the center to the north pole, project stereographically from the
    south pole (the boundary becomes the circle of radius ``tan(r/2)``),
    invert in that circle and map back.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    Q = rotation_to_north(cap.center)
    y = x @ Q.T
    rho2 = np.tan(cap.radius / 2.0) ** 2
    out = np.empty_like(y)
    north = y[:, 2] > 1.0 - 1e-15
    south = y[:, 2] < -1.0 + 1e-15
    mid = ~(north | south)
    z = stereographic(y[mid])
    z2 = np.sum(z * z, axis=1, keepdims=True)
    out[mid] = inverse_stereographic(rho2 * z / z2)
    out[north] = [0.0, 0.0, -1.0]
    out[south] = [0.0, 0.0, 1.0]
    return out @ Q


def cap_reflection(cap: SphericalCap, x) -> np.ndarray:
    """``R_Z``: identity outside the cap, conformal reflection inside."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = x.copy()
    inside = cap.contains(x)
    if np.any(inside):
        out[inside] = reflect_across_cap(cap, x[inside])
    return out


def image_cap(a, cap: SphericalCap) -> SphericalCap:
    """The cap ``G_a(cap)``; Moebius maps send circles to circles."""
    b = apply_moebius(a, cap.boundary_points(24))
    centroid = b.mean(axis=0)
    _, _, vt = np.linalg.svd(b - centroid)
    n = vt[-1]
    h = float(centroid @ n)
    inner = apply_moebius(a, np.asarray(cap.center)[None, :])[0]
    if inner @ n < h:
        n, h = -n, -h
    return SphericalCap(tuple(n), float(np.arccos(np.clip(h, -1.0, 1.0))))
