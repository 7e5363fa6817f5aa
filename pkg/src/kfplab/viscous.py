"""Viscous regularisation: add ``eps * Delta_Y`` and march in time.

The discrete problem solved is

    div_X A(grad_X u) + eps Delta_Y u - (d/dt + X . grad_Y) u = g*

with ``u = g`` on the whole parabolic boundary (the ``X``- and ``Y``-faces and
``t = t0``).  With this sign convention a sub-solution is a function whose
residual is nonnegative.  Each time level is a nonlinear elliptic problem
solved by damped Picard (Kacanov) iteration: the secant matrix ``S`` with
``A(xi) = S(xi) xi`` is frozen at the current iterate, so linear symbols
converge in one step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import (
    BoxDomain,
    Field,
    Grid,
    classify_boundary,
    grad_matrices,
    laplace_y_matrix,
    transport_matrix,
    y_transport_matrix,
)
from .symbol import Symbol, eval_symbol

__all__ = [
    "DirichletProblem",
    "SolveReport",
    "SolverOptions",
    "march",
    "solve_slice",
    "continuation",
    "residual",
    "discrete_operator",
    "equation_mask",
    "sample",
]

Data = Union[float, Callable]


def sample(data: Data, grid: Grid) -> np.ndarray:
    """Evaluate a constant or a vectorised ``fn(x, y, t)`` at every node."""
    if callable(data):
        x, y, t = grid.coords()
        vals = np.broadcast_to(np.asarray(data(x, y, t), float), grid.shape).copy()
    else:
        vals = np.full(grid.shape, float(data))
    if not np.all(np.isfinite(vals)):
        raise ValueError("data must be finite on the closed domain")
    return vals


@dataclass(frozen=True)
class DirichletProblem:
    """Boundary datum ``g``, source ``gstar`` and viscosity ``epsilon``.

    ``g`` and ``gstar`` are constants or vectorised callables ``fn(x, y, t)``
    with ``x, y`` of shape ``(..., m)``.  ``epsilon=None`` means ``hY^2`` of
    the grid the problem is solved on.
    """

    domain: BoxDomain
    symbol: Symbol
    g: Data = 0.0
    gstar: Data = 0.0
    epsilon: Optional[float] = None

    def __post_init__(self):
        if self.epsilon is not None and not self.epsilon >= 0:
            raise ValueError("epsilon must be nonnegative")
        if self.symbol.m != self.domain.m:
            raise ValueError("symbol and domain dimensions differ")

    def eps_for(self, grid: Grid) -> float:
        if self.epsilon is None:
            return float(max(grid.hy) ** 2)
        return float(self.epsilon)

    def with_epsilon(self, eps: float) -> "DirichletProblem":
        return DirichletProblem(self.domain, self.symbol, self.g, self.gstar, eps)


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-10
    max_iter: int = 200
    omega: float = 1.0
    growth_limit: int = 5
    max_restarts: int = 3
    linear_solver: str = "auto"
    """``"direct"`` (sparse LU), ``"krylov"`` (ILU-preconditioned GMRES) or
    ``"auto"``: direct below :data:`DIRECT_LIMIT` unknowns per slice."""


@dataclass(frozen=True)
class SolveReport:
    field: Field
    iterations: list
    residual_history: list
    converged: bool
    eps_used: float
    drift: Optional[float] = None
    message: str = ""


@dataclass
class _SliceOps:
    grads: tuple
    lap_y: sp.csr_matrix
    trans_y: sp.csr_matrix
    interior: np.ndarray  # flat slice indices carrying an equation
    x: np.ndarray
    y: np.ndarray


def _slice_ops(grid: Grid) -> _SliceOps:
    m = grid.m
    shape = grid.slice_shape
    idx = np.indices(shape).reshape(2 * m, -1)
    lim = np.array([grid.ny - 1] * m + [grid.nx - 1] * m)[:, None]
    interior = np.flatnonzero(np.all((idx > 0) & (idx < lim), axis=0))
    x, y, _ = grid.coords()
    return _SliceOps(
        grads=grad_matrices(grid, 1, False),
        lap_y=laplace_y_matrix(grid, False),
        trans_y=y_transport_matrix(grid, "upwind", False),
        interior=interior,
        x=x[0].reshape(-1, m),
        y=y[0].reshape(-1, m),
    )


def _flux_div(s: Symbol, ops: _SliceOps, u: np.ndarray, t: float):
    gu = np.stack([d @ u for d in ops.grads], axis=-1)
    a = eval_symbol(s, gu, ops.x, ops.y, np.full(u.size, t))
    return sum(d @ a[:, k] for k, d in enumerate(ops.grads)), gu


def _slice_residual(s, ops, u, prev, t, eps, ht, gstar):
    div, gu = _flux_div(s, ops, u, t)
    r = div + eps * (ops.lap_y @ u) - ops.trans_y @ u - (u - prev) / ht - gstar
    return r[ops.interior], gu


def _slice_matrix(s: Symbol, ops: _SliceOps, gu: np.ndarray, t: float, eps: float, ht: float):
    n = gu.shape[0]
    sec = s.secant_matrix(gu, ops.x, ops.y, np.full(n, t))
    mat = eps * ops.lap_y - ops.trans_y - sp.identity(n) / ht
    for k, dk in enumerate(ops.grads):
        for l, dl in enumerate(ops.grads):
            coef = np.broadcast_to(sec[..., k, l], (n,))
            if np.any(coef != 0):
                mat = mat + dk @ sp.diags(coef) @ dl
    idx = ops.interior
    return mat.tocsr()[idx][:, idx].tocsc()


DIRECT_LIMIT = 8000


class _Linear:
    """Inner linear solver for one slice; the ILU preconditioner is built once and reused."""

    def __init__(self, how: str, tol: float):
        if how not in ("auto", "direct", "krylov"):
            raise ValueError(f"unknown linear solver {how!r}")
        self.how = how
        self.tol = tol
        self.prec = None

    def _precondition(self, mat):
        ilu = spla.spilu(mat, drop_tol=1e-3, fill_factor=5)
        self.prec = spla.LinearOperator(mat.shape, ilu.solve)

    def solve(self, mat, rhs):
        if self.how == "direct" or (self.how == "auto" and mat.shape[0] <= DIRECT_LIMIT):
            return spla.splu(mat).solve(rhs)
        for fresh in (False, True):
            if self.prec is None or fresh:
                self._precondition(mat)
            sol, info = spla.gmres(mat, rhs, M=self.prec, rtol=self.tol, atol=0.0, restart=50, maxiter=100)
            if info == 0:
                return sol
        return spla.splu(mat).solve(rhs)


def solve_slice(
    s: Symbol,
    ops: _SliceOps,
    prev: np.ndarray,
    boundary: np.ndarray,
    gstar: np.ndarray,
    t: float,
    eps: float,
    ht: float,
    guess: Optional[np.ndarray] = None,
    options: SolverOptions = SolverOptions(),
):
    """One backward-Euler level.

    ``prev`` is the previous level, ``boundary`` holds Dirichlet values (only
    its lateral-boundary entries are used) and ``guess`` an optional initial
    iterate.  Returns ``(u, iterations, final_residual, converged)``.
    """
    idx = ops.interior
    start = np.array(boundary, dtype=float, copy=True)
    start[idx] = (prev if guess is None else guess)[idx]
    omega = options.omega
    total = 0
    linear = _Linear(options.linear_solver, 1e-3 * options.tol)
    for _ in range(options.max_restarts + 1):
        u = start.copy()
        r, gu = _slice_residual(s, ops, u, prev, t, eps, ht, gstar)
        ref = max(np.max(np.abs(r), initial=0.0), np.max(np.abs(prev), initial=0.0) / ht,
                  np.max(np.abs(gstar), initial=0.0))
        target = options.tol * ref
        res = np.max(np.abs(r), initial=0.0)
        growth = 0
        diverged = False
        for it in range(1, options.max_iter + 1):
            mat = _slice_matrix(s, ops, gu, t, eps, ht)
            u[idx] -= omega * linear.solve(mat, r)
            total += 1
            r, gu = _slice_residual(s, ops, u, prev, t, eps, ht, gstar)
            new = np.max(np.abs(r), initial=0.0)
            if not np.isfinite(new):
                diverged = True
                break
            growth = growth + 1 if new > res else 0
            res = new
            if res <= target:
                return u, total, res, True
            if growth >= options.growth_limit:
                diverged = True
                break
        if not diverged:
            return u, total, res, False
        omega *= 0.5
    return u, total, res, False


def march(p: DirichletProblem, grid: Grid, options: SolverOptions = SolverOptions(),
          guess: Optional[Field] = None) -> SolveReport:
    """Backward-Euler sweep over all time levels."""
    eps = p.eps_for(grid)
    if eps <= 0:
        raise ValueError("march needs epsilon > 0; use continuation for the eps -> 0 limit")
    if grid.domain != p.domain:
        raise ValueError("grid was not built on the problem domain")
    g = sample(p.g, grid)
    gs = sample(p.gstar, grid)
    ops = _slice_ops(grid)
    nt = grid.nt
    size = int(np.prod(grid.slice_shape))
    u = np.empty((nt, size))
    u[0] = g[0].reshape(-1)
    iters, hist = [], []
    ok = True
    msg = ""
    tn = grid.t_nodes
    for n in range(1, nt):
        gv = None if guess is None else guess.values[n].reshape(-1)
        un, k, res, conv = solve_slice(
            p.symbol, ops, u[n - 1], g[n].reshape(-1), gs[n].reshape(-1), tn[n], eps, grid.ht, gv, options
        )
        u[n] = un
        iters.append(k)
        hist.append(float(res))
        if not conv:
            ok = False
            msg = f"slice {n} did not converge (residual {res:.3e} after {k} iterations)"
            break
    if not ok:
        u[len(iters) + 1 :] = np.nan
    return SolveReport(Field(grid, u.reshape(grid.shape)), iters, hist, ok, eps, message=msg)


def continuation(p: DirichletProblem, grid: Grid, eps_list: Sequence[float],
                 options: SolverOptions = SolverOptions()) -> list:
    """Solve for decreasing ``eps``, warm-starting each level from the previous solution."""
    eps_list = [float(e) for e in eps_list]
    if any(e <= 0 for e in eps_list) or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing and positive")
    reports = []
    prev = None
    w = grid.weights()
    for eps in eps_list:
        rep = march(p.with_epsilon(eps), grid, options, guess=prev)
        drift = None
        if prev is not None:
            drift = float(np.sqrt(np.sum(w * (rep.field.values - prev.values) ** 2)))
        rep = SolveReport(rep.field, rep.iterations, rep.residual_history, rep.converged, eps, drift, rep.message)
        reports.append(rep)
        if not rep.converged:
            break
        prev = rep.field
    return reports


def equation_mask(grid: Grid, eps: float) -> np.ndarray:
    """Nodes where the discrete equation is imposed.

    For ``eps > 0`` these are the nodes off the parabolic boundary; for
    ``eps = 0`` the nodes off the Kolmogorov boundary ``Gamma u Sigma^-``.
    """
    if eps > 0:
        m = grid.m
        idx = np.indices(grid.shape, sparse=True)
        mask = np.broadcast_to(idx[0] > 0, grid.shape).copy()
        for k in range(m):
            iy = idx[grid.y_axis(k)]
            ix = idx[grid.x_axis(k)]
            mask &= (iy > 0) & (iy < grid.ny - 1) & (ix > 0) & (ix < grid.nx - 1)
        return mask
    return classify_boundary(grid).free


def discrete_operator(s: Symbol, grid: Grid, u, eps: float = 0.0, scheme: str = "upwind") -> np.ndarray:
    """``div_X A(grad_X u) + eps Delta_Y u - transport u`` at every node (full-grid stencils)."""
    vals = u.values if isinstance(u, Field) else np.asarray(u, float)
    flat = vals.reshape(-1)
    grads = grad_matrices(grid, 1)
    x, y, t = grid.coords()
    gu = np.stack([d @ flat for d in grads], axis=-1)
    a = eval_symbol(s, gu, x.reshape(-1, grid.m), y.reshape(-1, grid.m), t.reshape(-1))
    out = sum(d @ a[:, k] for k, d in enumerate(grads)) - transport_matrix(grid, scheme) @ flat
    if eps:
        out = out + eps * (laplace_y_matrix(grid) @ flat)
    return out.reshape(grid.shape)


def residual(p: DirichletProblem, grid: Grid, u, eps: Optional[float] = None):
    """Sup and trapezoid-``L^2`` norms of ``L u - g*`` over :func:`equation_mask` nodes."""
    eps = p.eps_for(grid) if eps is None else float(eps)
    r = discrete_operator(p.symbol, grid, u, eps) - sample(p.gstar, grid)
    mask = equation_mask(grid, eps)
    r = np.where(mask, r, 0.0)
    return float(np.max(np.abs(r))), float(np.sqrt(np.sum(grid.weights() * r**2)))
