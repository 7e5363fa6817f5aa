"""Named boundary and source data.

Every entry is a vectorised callable ``fn(x, y, t)`` with ``x, y`` of shape
``(..., m)`` and ``t`` of shape ``(...)``.  The CLI refers to data only by
name and keyword parameters from this table.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

__all__ = ["DATA", "make_data", "manufactured_solution", "manufactured_source", "CatalogError"]


class CatalogError(KeyError):
    """Unknown catalog name or bad parameters."""


def _zero(m):
    return lambda x, y, t: np.zeros(np.shape(t))


def _const(m, value=1.0):
    value = float(value)
    return lambda x, y, t: np.full(np.shape(t), value)


def _affine(m, c0=0.0, cx=0.0, cy=0.0, ct=0.0):
    c0, cx, cy, ct = (float(v) for v in (c0, cx, cy, ct))
    return lambda x, y, t: c0 + cx * np.sum(x, -1) + cy * np.sum(y, -1) + ct * t


def _sines(m, amp=0.5, kx=1.0, ky=1.0, kt=0.0, offset=1.0):
    """``offset + amp * prod_k sin(kx pi x_k) cos(ky pi y_k) * cos(kt pi t)``."""
    amp, kx, ky, kt, offset = (float(v) for v in (amp, kx, ky, kt, offset))

    def fn(x, y, t):
        prod = np.prod(np.sin(kx * np.pi * x) * np.cos(ky * np.pi * y), axis=-1)
        return offset + amp * prod * np.cos(kt * np.pi * t)

    return fn


def _bump(m, amp=1.0, width=0.25, cx=0.0, cy=0.0, ct=-0.5):
    amp, width, cx, cy, ct = (float(v) for v in (amp, width, cx, cy, ct))

    def fn(x, y, t):
        r2 = np.sum((x - cx) ** 2, -1) + np.sum((y - cy) ** 2, -1) + (t - ct) ** 2
        return amp * np.exp(-r2 / width**2)

    return fn


def _checker(m, cell=0.25, low=-1.0, high=1.0):
    """Piecewise constant by the parity of the cell index sum: rough data."""
    cell, low, high = float(cell), float(low), float(high)

    def fn(x, y, t):
        k = np.floor(t / cell) + np.sum(np.floor(x / cell), -1) + np.sum(np.floor(y / cell), -1)
        return np.where(k.astype(np.int64) % 2 == 0, low, high)

    return fn


def _positive_random(m, seed=0, modes=3, floor=0.2, sx=1.0, sy=1.0, st=1.0):
    """``1 + sum of random smooth modes`` scaled to stay above ``floor``.

    ``sx, sy, st`` are length scales for the oscillations in ``x, y, t``.
    """
    rng = np.random.default_rng(int(seed))
    modes = int(modes)
    freq = rng.uniform(0.5, 2.0, (modes, 3))
    phase = rng.uniform(0, 2 * np.pi, (modes, 3))
    amp = rng.uniform(0.2, 1.0, modes)
    amp *= (1.0 - float(floor)) / amp.sum()

    def fn(x, y, t):
        out = np.ones(np.shape(t))
        for a, f, p in zip(amp, freq, phase):
            term = np.cos(f[2] * np.pi * t / st + p[2])
            term = term * np.prod(np.cos(f[0] * np.pi * x / sx + p[0]) * np.cos(f[1] * np.pi * y / sy + p[1]), -1)
            out = out + a * term
        return out

    return fn


def manufactured_solution(m, offset=1.0):
    """``offset + exp(-t) prod_k sin(2 pi x_k) sin(pi y_k)``."""
    offset = float(offset)

    def fn(x, y, t):
        return offset + np.exp(-t) * np.prod(np.sin(2 * np.pi * x) * np.sin(np.pi * y), -1)

    return fn


def manufactured_source(m, eps=0.0, offset=1.0):
    """Source making :func:`manufactured_solution` exact for the identity flux with viscosity ``eps``.

    ``g* = Delta_X u + eps Delta_Y u - d/dt u - X . grad_Y u``.
    """
    eps = float(eps)

    def fn(x, y, t):
        sx = np.sin(2 * np.pi * x)
        sy = np.sin(np.pi * y)
        prod = np.prod(sx * sy, -1)
        e = np.exp(-t)
        lap_x = -m * (2 * np.pi) ** 2 * prod
        lap_y = -m * np.pi**2 * prod
        drift = np.zeros(np.shape(t))
        for k in range(m):
            others = np.prod(np.delete(sx * sy, k, axis=-1), -1) if m > 1 else 1.0
            drift = drift + x[..., k] * np.pi * np.cos(np.pi * y[..., k]) * sx[..., k] * others
        return e * (lap_x + eps * lap_y + prod - drift)

    return fn


DATA = {
    "zero": _zero,
    "const": _const,
    "affine": _affine,
    "sines": _sines,
    "bump": _bump,
    "checker": _checker,
    "positive_random": _positive_random,
    "manufactured": lambda m, offset=1.0: manufactured_solution(m, offset),
    "manufactured_source": lambda m, eps=0.0, offset=1.0: manufactured_source(m, eps, offset),
}


def make_data(name: str, m: int, **params) -> Callable:
    """Look up ``name`` in :data:`DATA` and bind its parameters."""
    if name not in DATA:
        raise CatalogError(f"unknown data name {name!r}; known: {', '.join(sorted(DATA))}")
    try:
        return DATA[name](m, **params)
    except TypeError as exc:
        raise CatalogError(f"bad parameters for {name!r}: {exc}") from None
