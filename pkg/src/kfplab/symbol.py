"""Nonlinear fluxes ``A(xi, X, Y, t)``, sample-based class checks, and the
convex representative ``Atilde(xi, eta) = phi(xi) + phi*(eta)``.

All symbol callables are vectorised: ``xi``, ``x``, ``y`` have shape
``(..., m)`` and ``t`` has shape ``(...)``; fluxes return ``(..., m)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "Symbol",
    "TildeA",
    "ClassReport",
    "SymbolError",
    "eval_symbol",
    "check_m_class",
    "check_r_class",
    "make_tilde_a",
    "m_class_samples",
    "r_class_samples",
    "identity_symbol",
    "spd_symbol",
    "checkerboard_symbol",
    "direction_modulated_symbol",
    "scaled_symbol",
    "superlinear_symbol",
    "fd_gradient_defect",
    "by_name",
    "midpoint_defect",
    "midpoint_quotients",
    "SYMBOL_PARAMS",
    "DIRECTION_MODULATED_LAMBDA",
]

_EPS = 1e-300


class SymbolError(ValueError):
    """Bad symbol input, non-finite flux, or unsupported construction."""


@dataclass(frozen=True)
class Symbol:
    """A flux ``A(xi, X, Y, t)`` with ellipticity constant ``lam``.

    ``matrix`` is set for symbols linear in ``xi`` (``A = M(X,Y,t) xi``).
    ``secant`` returns ``S`` with ``A(xi) = S(xi) xi``; the viscous solver
    freezes it between Picard steps.
    """

    m: int
    lam: float
    flux: Callable
    declared_class: str = "M"
    potential: Optional[tuple] = None
    matrix: Optional[Callable] = None
    secant: Optional[Callable] = None
    name: str = "symbol"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.m < 1:
            raise SymbolError("m must be >= 1")
        if not self.lam >= 1:
            raise SymbolError(f"lambda must be >= 1, got {self.lam}")
        if self.declared_class not in ("M", "R"):
            raise SymbolError("declared_class must be 'M' or 'R'")

    def secant_matrix(self, xi, x, y, t):
        if self.matrix is not None:
            mat = self.matrix(x, y, t)
            return np.broadcast_to(mat, np.shape(xi)[:-1] + (self.m, self.m))
        if self.secant is not None:
            return self.secant(xi, x, y, t)
        eye = np.eye(self.m) / self.lam
        return np.broadcast_to(eye, np.shape(xi)[:-1] + (self.m, self.m))


def _broadcast_args(s: Symbol, xi, x, y, t):
    xi = np.asarray(xi, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    for name, v in (("xi", xi), ("x", x), ("y", y)):
        if v.ndim == 0 or v.shape[-1] != s.m:
            raise SymbolError(f"{name} must have trailing dimension m={s.m}, got shape {v.shape}")
    return xi, x, y, t


def eval_symbol(s: Symbol, xi, x, y, t):
    """Evaluate ``A(xi, X, Y, t)``; raises :class:`SymbolError` on non-finite output."""
    xi, x, y, t = _broadcast_args(s, xi, x, y, t)
    out = np.asarray(s.flux(xi, x, y, t), dtype=float)
    if not np.all(np.isfinite(out)):
        raise SymbolError(f"symbol {s.name!r} returned non-finite values")
    return out


# -- catalog ----------------------------------------------------------------


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def _matvec(mat, v):
    return np.einsum("...ij,...j->...i", mat, v)


def identity_symbol(m: int = 1) -> Symbol:
    return Symbol(
        m=m,
        lam=1.0,
        flux=lambda xi, x, y, t: np.array(xi, dtype=float, copy=True),
        declared_class="R",
        potential=(lambda xi, x, y, t: 0.5 * _dot(xi, xi), lambda eta, x, y, t: 0.5 * _dot(eta, eta)),
        matrix=lambda x, y, t: np.eye(m),
        name="identity",
    )


def spd_symbol(matrix, lam: Optional[float] = None) -> Symbol:
    """Constant symmetric positive-definite ``A(xi) = M xi``."""
    mat = np.atleast_2d(np.asarray(matrix, dtype=float))
    if mat.shape[0] != mat.shape[1] or not np.allclose(mat, mat.T, rtol=0, atol=1e-14):
        raise SymbolError("matrix must be square and symmetric")
    ev = np.linalg.eigvalsh(mat)
    if ev[0] <= 0:
        raise SymbolError("matrix must be positive definite")
    if lam is None:
        lam = max(1.0, ev[-1], 1.0 / ev[0])
    inv = np.linalg.inv(mat)
    return Symbol(
        m=mat.shape[0],
        lam=float(lam),
        flux=lambda xi, x, y, t: _matvec(mat, xi),
        declared_class="R",
        potential=(
            lambda xi, x, y, t: 0.5 * _dot(xi, _matvec(mat, xi)),
            lambda eta, x, y, t: 0.5 * _dot(eta, _matvec(inv, eta)),
        ),
        matrix=lambda x, y, t: mat,
        name="spd",
        params={"matrix": mat.tolist()},
    )


def checkerboard_symbol(m: int = 1, low: float = 0.25, high: float = 4.0, cell: float = 0.25) -> Symbol:
    """``A = a(X,Y,t) xi`` with ``a`` alternating between ``low`` and ``high``
    on a checkerboard of cells of side ``cell`` in all ``2m+1`` coordinates."""
    if not (0 < low <= high):
        raise SymbolError("need 0 < low <= high")
    lam = max(1.0, high, 1.0 / low)

    def coeff(x, y, t):
        x, y, t = np.asarray(x, float), np.asarray(y, float), np.asarray(t, float)
        parity = np.floor(t / cell).astype(np.int64)
        parity = parity + np.floor(x / cell).astype(np.int64).sum(axis=-1)
        parity = parity + np.floor(y / cell).astype(np.int64).sum(axis=-1)
        return np.where(parity % 2 == 0, low, high)

    eye = np.eye(m)
    return Symbol(
        m=m,
        lam=lam,
        flux=lambda xi, x, y, t: coeff(x, y, t)[..., None] * xi,
        declared_class="R",
        potential=(
            lambda xi, x, y, t: 0.5 * coeff(x, y, t) * _dot(xi, xi),
            lambda eta, x, y, t: 0.5 * _dot(eta, eta) / coeff(x, y, t),
        ),
        matrix=lambda x, y, t: coeff(x, y, t)[..., None, None] * eye,
        name="checkerboard",
        params={"low": low, "high": high, "cell": cell},
    )


# Lambda for delta = 0.25: check_r_class over 1e5 unit-sphere pairs gives a
# Lipschitz quotient 1.30512 and monotonicity 0.94822, matching the extreme
# Jacobian values on the unit circle.
DIRECTION_MODULATED_LAMBDA = 1.31


def direction_modulated_symbol(m: int = 2, delta: float = 0.25, lam: Optional[float] = None) -> Symbol:
    """``A(xi) = xi (1 + delta xi_1^2 / |xi|^2)``, odd and 1-homogeneous, not a gradient."""
    if lam is None:
        lam = DIRECTION_MODULATED_LAMBDA if (m >= 2 and delta == 0.25) else max(1.0, 1.0 + abs(delta)) * 1.5

    def coeff(xi):
        n2 = _dot(xi, xi)
        safe = np.where(n2 > 0, n2, 1.0)
        return np.where(n2 > 0, 1.0 + delta * xi[..., 0] ** 2 / safe, 1.0)

    eye = np.eye(m)
    return Symbol(
        m=m,
        lam=float(lam),
        flux=lambda xi, x, y, t: coeff(xi)[..., None] * xi,
        declared_class="R",
        secant=lambda xi, x, y, t: coeff(xi)[..., None, None] * eye,
        name="direction_modulated",
        params={"delta": delta},
    )


def scaled_symbol(m: int = 1, factor: float = 2.0, lam: float = 1.0) -> Symbol:
    """``A = factor * xi`` with a freely declared lambda (a constructed violator for lam < factor)."""
    return Symbol(m=m, lam=lam, flux=lambda xi, x, y, t: factor * np.asarray(xi), name="scaled",
                  params={"factor": factor})


def superlinear_symbol(m: int = 1, lam: float = 2.0) -> Symbol:
    """``A = xi + xi |xi|``; breaks 1-homogeneity."""

    def flux(xi, x, y, t):
        xi = np.asarray(xi, float)
        return xi + xi * np.linalg.norm(xi, axis=-1, keepdims=True)

    return Symbol(m=m, lam=lam, flux=flux, name="superlinear")


def by_name(name: str, m: int = 1, **params) -> Symbol:
    """Build a catalog symbol from its name and keyword parameters."""
    if name == "identity":
        return identity_symbol(m)
    if name == "spd":
        mat = params.get("matrix")
        if mat is None:
            raise SymbolError("spd symbol needs 'matrix'")
        mat = np.asarray(mat, float)
        if mat.ndim == 1:
            mat = np.diag(mat)
        return spd_symbol(mat, params.get("lam"))
    if name == "checkerboard":
        kw = {k: params[k] for k in ("low", "high", "cell") if k in params}
        return checkerboard_symbol(m, **kw)
    if name == "direction_modulated":
        kw = {k: params[k] for k in ("delta", "lam") if k in params}
        return direction_modulated_symbol(m, **kw)
    if name == "scaled":
        kw = {k: params[k] for k in ("factor", "lam") if k in params}
        return scaled_symbol(m, **kw)
    if name == "superlinear":
        kw = {k: params[k] for k in ("lam",) if k in params}
        return superlinear_symbol(m, **kw)
    raise SymbolError(f"unknown symbol {name!r}")


SYMBOL_PARAMS = {
    "identity": (),
    "spd": ("matrix", "lam"),
    "checkerboard": ("low", "high", "cell"),
    "direction_modulated": ("delta", "lam"),
    "scaled": ("factor", "lam"),
    "superlinear": ("lam",),
}
"""Keyword parameters accepted by :func:`by_name` for each symbol name."""


# -- class checks -----------------------------------------------------------


@dataclass(frozen=True)
class ClassReport:
    class_tested: str
    worst_upper: float
    worst_lower: float
    worst_homogeneity: float
    lam: float
    tol: float
    failing: tuple = ()

    @property
    def passed(self) -> bool:
        return not self.failing


def _verdict(class_tested, upper, lower, homog, lam, tol):
    failing = []
    if upper > lam * (1 + tol):
        failing.append("i")
    if lower < (1 - tol) / lam:
        failing.append("ii")
    if homog > tol:
        failing.append("iii")
    return ClassReport(class_tested, float(upper), float(lower), float(homog), float(lam), tol, tuple(failing))


def _random_points(rng, n, m, scale=1.0):
    return rng.uniform(-scale, scale, (n, m)), rng.uniform(-scale, scale, (n, m)), rng.uniform(-scale, scale, n)


def _unit_vectors(rng, n, m):
    v = rng.standard_normal((n, m))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def m_class_samples(m: int, n: int = 2000, seed: int = 0):
    """Random directions times a radius sweep, random points, and a lambda grid."""
    rng = np.random.default_rng(seed)
    radii = np.geomspace(1e-3, 1e3, 7)
    lams = np.array([-3.0, -1.0, -0.5, 0.25, 2.0, 10.0])
    xi = _unit_vectors(rng, n, m) * radii[rng.integers(0, radii.size, n)][:, None]
    x, y, t = _random_points(rng, n, m)
    return xi, x, y, t, lams[rng.integers(0, lams.size, n)]


def r_class_samples(m: int, n: int = 2000, seed: int = 0):
    """Pairs on the unit sphere plus near-coincident pairs, at random points.

    For ``m = 1`` the sphere is ``{-1, 1}``, so the pairs get log-uniform
    radii in ``[0.1, 10]`` instead.
    """
    rng = np.random.default_rng(seed)
    xi1 = _unit_vectors(rng, n, m)
    xi2 = _unit_vectors(rng, n, m)
    if m == 1:
        xi1 *= np.exp(rng.uniform(np.log(0.1), np.log(10.0), (n, 1)))
        xi2 *= np.exp(rng.uniform(np.log(0.1), np.log(10.0), (n, 1)))
    close = rng.random(n) < 0.25
    xi2[close] = xi1[close] + 1e-3 * _unit_vectors(rng, int(close.sum()), m)
    x, y, t = _random_points(rng, n, m)
    return xi1, xi2, x, y, t


def check_m_class(s: Symbol, samples, tol: float = 1e-10) -> ClassReport:
    """Worst quotients of the three M(lambda) clauses over ``samples``.

    ``samples`` is ``(xi, x, y, t, lam)``: arrays of shape (n, m), (n, m),
    (n, m), (n,), (n,).
    """
    xi, x, y, t, lam = (np.asarray(a, float) for a in samples)
    if xi.shape[0] == 0:
        raise SymbolError("empty sample set")
    nxi = np.linalg.norm(xi, axis=-1)
    if np.any(nxi == 0) or np.any(lam == 0):
        raise SymbolError("samples need xi != 0 and lambda != 0")
    a = eval_symbol(s, xi, x, y, t)
    upper = np.max(np.linalg.norm(a, axis=-1) / nxi)
    lower = np.min(_dot(a, xi) / nxi**2)
    a_scaled = eval_symbol(s, lam[:, None] * xi, x, y, t)
    homog = np.max(np.linalg.norm(a_scaled - lam[:, None] * a, axis=-1) / (np.abs(lam) * nxi))
    return _verdict("M", upper, lower, homog, s.lam, tol)


def check_r_class(s: Symbol, pair_samples, tol: float = 1e-10) -> ClassReport:
    """Lipschitz and strong-monotonicity quotients over pairs ``(xi1, xi2, x, y, t)``."""
    xi1, xi2, x, y, t = (np.asarray(a, float) for a in pair_samples)
    if xi1.shape[0] == 0:
        raise SymbolError("empty sample set")
    d = xi1 - xi2
    nd = np.linalg.norm(d, axis=-1)
    if np.any(nd == 0):
        raise SymbolError("coincident pair in R-class samples")
    da = eval_symbol(s, xi1, x, y, t) - eval_symbol(s, xi2, x, y, t)
    upper = np.max(np.linalg.norm(da, axis=-1) / nd)
    lower = np.min(_dot(da, d) / nd**2)
    a1 = eval_symbol(s, xi1, x, y, t)
    homog = 0.0
    n1 = np.maximum(np.linalg.norm(xi1, axis=-1), _EPS)
    for lam in (-2.0, -0.5, 0.5, 3.0):
        defect = np.linalg.norm(eval_symbol(s, lam * xi1, x, y, t) - lam * a1, axis=-1) / (abs(lam) * n1)
        homog = max(homog, float(np.max(defect)))
    return _verdict("R", upper, lower, homog, s.lam, tol)


def fd_gradient_defect(s: Symbol, n: int = 1000, seed: int = 0, step: float = 1e-5) -> float:
    """Max relative mismatch between ``eval_symbol`` and the central-difference gradient of phi."""
    if s.potential is None:
        raise SymbolError(f"symbol {s.name!r} has no potential")
    phi = s.potential[0]
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal((n, s.m))
    x, y, t = _random_points(rng, n, s.m)
    grad = np.empty_like(xi)
    for k in range(s.m):
        e = np.zeros(s.m)
        e[k] = step
        grad[:, k] = (phi(xi + e, x, y, t) - phi(xi - e, x, y, t)) / (2 * step)
    a = eval_symbol(s, xi, x, y, t)
    return float(np.max(np.linalg.norm(grad - a, axis=-1) / np.maximum(np.linalg.norm(a, axis=-1), _EPS)))


# -- variational representative ----------------------------------------------


@dataclass(frozen=True)
class TildeA:
    """``Atilde(xi, eta) = phi(xi) + phi*(eta) >= xi.eta`` with equality iff ``eta = A(xi)``.

    For linear symbols ``matrix`` holds ``M(X,Y,t)`` and :meth:`defect` uses
    the completed square ``0.5 (xi - M^-1 eta).M(xi - M^-1 eta)``.
    """

    eval: Callable
    gamma: float
    symbol: Symbol
    matrix: Optional[Callable] = None

    @property
    def quadratic(self) -> bool:
        return self.matrix is not None

    def defect(self, xi, eta, x, y, t):
        """``Atilde(xi, eta) - xi.eta`` (nonnegative)."""
        if self.matrix is not None:
            mat = np.broadcast_to(self.matrix(x, y, t), np.shape(xi)[:-1] + (self.symbol.m, self.symbol.m))
            r = xi - np.linalg.solve(mat, eta[..., None])[..., 0]
            return 0.5 * _dot(r, _matvec(mat, r))
        return self.eval(xi, eta, x, y, t) - _dot(xi, eta)


def make_tilde_a(s: Symbol, check: bool = True) -> TildeA:
    """Fenchel representative for gradient-type or linear symmetric symbols."""
    if s.potential is not None:
        phi, phi_star = s.potential
    elif s.matrix is not None:
        def phi(xi, x, y, t):
            return 0.5 * _dot(xi, _matvec(np.broadcast_to(s.matrix(x, y, t), xi.shape + (s.m,)), xi))

        def phi_star(eta, x, y, t):
            mat = np.broadcast_to(s.matrix(x, y, t), eta.shape + (s.m,))
            return 0.5 * _dot(eta, np.linalg.solve(mat, eta[..., None])[..., 0])
    else:
        raise SymbolError(f"symbol {s.name!r} has no convex potential and is not linear; Atilde unsupported")

    def ev(xi, eta, x, y, t):
        return phi(xi, x, y, t) + phi_star(eta, x, y, t)

    ta = TildeA(eval=ev, gamma=2 * s.lam + 1, symbol=s, matrix=s.matrix)
    if check:
        rng = np.random.default_rng(12345)
        n = 256
        xi = rng.standard_normal((n, s.m))
        eta = rng.standard_normal((n, s.m))
        x, y, t = _random_points(rng, n, s.m)
        scale = 1 + _dot(xi, xi) + _dot(eta, eta)
        if np.any(ev(xi, eta, x, y, t) - _dot(xi, eta) < -1e-10 * scale):
            raise SymbolError("Fenchel-Young inequality violated on the built-in sweep")
        a = eval_symbol(s, xi, x, y, t)
        eq = ev(xi, a, x, y, t) - _dot(xi, a)
        if np.any(np.abs(eq) > 1e-8 * (1 + _dot(xi, a))):
            raise SymbolError("equality case Atilde(xi, A(xi)) = xi.A(xi) violated on the built-in sweep")
    return ta


def midpoint_defect(ta: TildeA, xi1, xi2, eta, x, y, t):
    """``Atilde(xi1, eta)/2 + Atilde(xi2, eta)/2 - Atilde((xi1 + xi2)/2, eta)``."""
    mid = 0.5 * (np.asarray(xi1) + np.asarray(xi2))
    return 0.5 * ta.eval(xi1, eta, x, y, t) + 0.5 * ta.eval(xi2, eta, x, y, t) - ta.eval(mid, eta, x, y, t)


def midpoint_quotients(ta: TildeA, n: int = 10_000, seed: int = 0):
    """Extreme values of ``midpoint_defect / |xi1 - xi2|^2`` over random triples.

    Convexity of ``Atilde - |.|^2 / (2 Gamma)`` and concavity of
    ``Atilde - Gamma |.|^2 / 2`` confine the quotient to
    ``[1 / (8 Gamma), Gamma / 8]``.
    """
    m = ta.symbol.m
    rng = np.random.default_rng(seed)
    xi1, xi2, eta = (rng.standard_normal((n, m)) * rng.uniform(0.1, 10, (n, 1)) for _ in range(3))
    x, y, t = _random_points(rng, n, m)
    q = midpoint_defect(ta, xi1, xi2, eta, x, y, t) / _dot(xi1 - xi2, xi1 - xi2)
    return float(np.min(q)), float(np.max(q))
