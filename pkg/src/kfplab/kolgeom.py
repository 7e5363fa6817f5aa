"""Galilean group law, anisotropic dilations and Kolmogorov cylinders.

Points are triples ``(X, Y, t)`` with ``X, Y`` in ``R^m``.  The group law is

    (X', Y', t') o (X, Y, t) = (X' + X, Y' + Y + t X', t' + t)

and the dilations ``delta_r(X, Y, t) = (r X, r^3 Y, r^2 t)`` are group
automorphisms.  The homogeneous norm ``|X| + |Y|^(1/3) + |t|^(1/2)`` (Euclidean
``|.|``) is 1-homogeneous with respect to ``delta_r``.

Besides the :class:`KPoint` API there are array versions (suffix ``_arrays``)
taking ``x, y`` of shape ``(..., m)`` and ``t`` of shape ``(...)``; the
estimators in :mod:`kfplab.verify` use those on whole point clouds.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gamma, pi

import numpy as np

__all__ = [
    "KPoint",
    "KCylinder",
    "origin",
    "compose",
    "inverse",
    "relative",
    "dilate",
    "hom_norm",
    "quasi_distance",
    "cylinder_contains",
    "relative_arrays",
    "hom_norm_arrays",
    "cylinder_mask",
]


@dataclass(frozen=True)
class KPoint:
    """A point ``(x, y, t)`` of ``R^m x R^m x R``."""

    x: np.ndarray
    y: np.ndarray
    t: float

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float)).copy()
        y = np.atleast_1d(np.asarray(self.y, dtype=float)).copy()
        if x.ndim != 1 or y.ndim != 1 or x.size != y.size or x.size < 1:
            raise ValueError(f"x and y must be vectors of equal length m >= 1, got {x.shape}, {y.shape}")
        t = float(self.t)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y)) and np.isfinite(t)):
            raise ValueError("KPoint entries must be finite")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "t", t)

    @property
    def m(self) -> int:
        return self.x.size

    def as_tuple(self):
        return tuple(map(float, self.x)), tuple(map(float, self.y)), self.t

    def allclose(self, other: "KPoint", atol: float = 1e-12) -> bool:
        _check_dims(self, other)
        return bool(
            np.allclose(self.x, other.x, rtol=0, atol=atol)
            and np.allclose(self.y, other.y, rtol=0, atol=atol)
            and abs(self.t - other.t) <= atol
        )


@dataclass(frozen=True)
class KCylinder:
    """The cylinder ``Q_r(center) = center o Q_r``."""

    center: KPoint
    radius: float

    def __post_init__(self):
        r = float(self.radius)
        if not (r > 0 and np.isfinite(r)):
            raise ValueError(f"cylinder radius must be positive, got {self.radius}")
        object.__setattr__(self, "radius", r)

    def volume(self) -> float:
        """Lebesgue measure; left translations preserve it."""
        m = self.center.m
        r = self.radius
        return _ball_volume(m, r) * _ball_volume(m, r**3) * r**2


def _ball_volume(m: int, r: float) -> float:
    # Euclidean ball |X| < r in R^m
    return pi ** (m / 2) / gamma(m / 2 + 1) * r**m


def origin(m: int) -> KPoint:
    return KPoint(np.zeros(m), np.zeros(m), 0.0)


def _check_dims(a: KPoint, b: KPoint):
    if a.m != b.m:
        raise ValueError(f"dimension mismatch: m={a.m} vs m={b.m}")


def compose(a: KPoint, b: KPoint) -> KPoint:
    """Group product ``a o b``."""
    _check_dims(a, b)
    return KPoint(a.x + b.x, a.y + b.y + b.t * a.x, a.t + b.t)


def inverse(p: KPoint) -> KPoint:
    return KPoint(-p.x, -p.y + p.t * p.x, -p.t)


def relative(p: KPoint, q: KPoint) -> KPoint:
    """``q^{-1} o p``, the position of ``p`` seen from ``q``."""
    _check_dims(p, q)
    dt = p.t - q.t
    return KPoint(p.x - q.x, p.y - q.y - dt * q.x, dt)


def dilate(r: float, p: KPoint) -> KPoint:
    if not r > 0:
        raise ValueError(f"dilation factor must be positive, got {r}")
    return KPoint(r * p.x, r**3 * p.y, r**2 * p.t)


def hom_norm(p: KPoint) -> float:
    return float(np.linalg.norm(p.x) + np.cbrt(np.linalg.norm(p.y)) + np.sqrt(abs(p.t)))


def quasi_distance(p: KPoint, q: KPoint) -> float:
    return hom_norm(relative(p, q))


def cylinder_contains(c: KCylinder, p: KPoint) -> bool:
    rel = relative(p, c.center)
    r = c.radius
    return bool(np.linalg.norm(rel.x) < r and np.linalg.norm(rel.y) < r**3 and -(r**2) < rel.t < 0.0)


# -- array versions ---------------------------------------------------------


def relative_arrays(x, y, t, qx, qy, qt):
    """Vectorised ``relative``; ``x, y`` have shape (..., m), ``t`` shape (...)."""
    x, y, t = np.asarray(x, float), np.asarray(y, float), np.asarray(t, float)
    qx, qy, qt = np.asarray(qx, float), np.asarray(qy, float), np.asarray(qt, float)
    dt = t - qt
    return x - qx, y - qy - dt[..., None] * qx, dt


def hom_norm_arrays(x, y, t):
    x, y, t = np.asarray(x, float), np.asarray(y, float), np.asarray(t, float)
    return np.linalg.norm(x, axis=-1) + np.cbrt(np.linalg.norm(y, axis=-1)) + np.sqrt(np.abs(t))


def cylinder_mask(c: KCylinder, x, y, t):
    """Boolean membership of many points in ``c`` (strict inequalities)."""
    rx, ry, rt = relative_arrays(x, y, t, c.center.x, c.center.y, c.center.t)
    r = c.radius
    return (np.linalg.norm(rx, axis=-1) < r) & (np.linalg.norm(ry, axis=-1) < r**3) & (rt > -(r**2)) & (rt < 0.0)
