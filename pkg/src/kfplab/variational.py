"""Brezis-Ekeland minimisation over constrained flux pairs.

For a quadratic representative ``Atilde(xi, eta) = phi(xi) + phi*(eta)`` the
functional

    J[u, j] = sum_nodes w * (Atilde(grad_X u, j) - grad_X u . j)

is minimised over pairs with ``u = g`` on the Kolmogorov boundary and
``div_X j = g* + (d/dt + X . grad_Y) u`` at the remaining nodes.  ``J >= 0``
on feasible pairs and ``J = 0`` exactly when ``j = A(grad_X u)``, so the value
at the returned pair is an a-posteriori certificate.

The minimiser is a two-block ADMM.  The flux is split as ``j = q``: the
``j``-block is a pointwise proximal step on ``phi*`` and the ``(u, q)``-block
is an equality-constrained quadratic programme solved through its sparse
symmetric saddle-point system.  The penalty is adapted by residual balancing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import Field, Grid, VectorField, classify_boundary, grad_matrices, hminus1_riesz, transport_matrix
from .symbol import SymbolError, TildeA, eval_symbol, make_tilde_a
from .verify import w_norm
from .viscous import DirichletProblem, sample

__all__ = [
    "FluxPair",
    "GapReport",
    "objective",
    "constraint_residual",
    "project_constraint",
    "certificate",
    "minimize",
    "problem_scale",
    "prox_phi_star",
]

_FLOOR = 1e-14


@dataclass(frozen=True)
class FluxPair:
    """``f`` vanishes on the Kolmogorov boundary; the state is ``u = lift + f``."""

    f: Field
    j: VectorField
    lift: Optional[Field] = None

    @property
    def u(self) -> np.ndarray:
        base = self.f.values
        return base if self.lift is None else base + self.lift.values


@dataclass(frozen=True)
class GapReport:
    objective: float
    constraint_residual: float
    flux_match: float
    iterations: int = 0
    converged: bool = True
    scale: float = 1.0
    trace: list = field(default_factory=list)


def _matrix_field(tilde_a: TildeA, grid: Grid) -> np.ndarray:
    m = grid.m
    x, y, t = grid.coords()
    return np.broadcast_to(tilde_a.matrix(x, y, t), grid.shape + (m, m))


def _grad(grid: Grid, u: np.ndarray) -> np.ndarray:
    flat = u.reshape(-1)
    return np.stack([(d @ flat).reshape(grid.shape) for d in grad_matrices(grid, 1)])


def _div(grid: Grid, w: np.ndarray) -> np.ndarray:
    out = np.zeros(grid.size)
    for k, d in enumerate(grad_matrices(grid, 1)):
        out += d @ w[k].reshape(-1)
    return out.reshape(grid.shape)


def _flux(tilde_a: TildeA, grid: Grid, u: np.ndarray) -> np.ndarray:
    x, y, t = grid.coords()
    gu = np.moveaxis(_grad(grid, u), 0, -1)
    return np.moveaxis(eval_symbol(tilde_a.symbol, gu, x, y, t), -1, 0)


def objective(pair: FluxPair, tilde_a: TildeA, grid: Grid) -> float:
    """Quadrature of ``Atilde(grad_X u, j) - grad_X u . j`` with ``u = lift + f``."""
    x, y, t = grid.coords()
    gu = np.moveaxis(_grad(grid, pair.u), 0, -1)
    j = pair.j.pointwise()
    return float(np.sum(grid.weights() * tilde_a.defect(gu, j, x, y, t)))


def _defect(p: DirichletProblem, grid: Grid, u: np.ndarray, j: np.ndarray) -> np.ndarray:
    """``g* + transport u - div_X j`` at free nodes, zero elsewhere."""
    free = classify_boundary(grid).free
    d = sample(p.gstar, grid) + (transport_matrix(grid) @ u.reshape(-1)).reshape(grid.shape) - _div(grid, j)
    return np.where(free, d, 0.0)


def constraint_residual(pair: FluxPair, p: DirichletProblem, grid: Grid) -> float:
    """Trapezoid-``L^2`` norm of the constraint defect over free nodes."""
    d = _defect(p, grid, pair.u, pair.j.values)
    return float(np.sqrt(np.sum(grid.weights() * d**2)))


def project_constraint(pair: FluxPair, p: DirichletProblem, grid: Grid) -> FluxPair:
    """Correct ``j`` by ``grad_X v`` where ``Delta_X v`` equals the defect on every ``(Y, t)`` slice."""
    d = _defect(p, grid, pair.u, pair.j.values)
    v = hminus1_riesz(d, grid)
    j = pair.j.values + _grad(grid, v)
    return FluxPair(pair.f, VectorField(grid, j), pair.lift)


def _w_norm(grid: Grid, u: np.ndarray) -> float:
    return w_norm(Field(grid, u), grid)


def problem_scale(p: DirichletProblem, grid: Grid) -> float:
    """``||g*||_{L^2} + ||g_ext||_W`` plus a floor, used to make tolerances dimensionless."""
    gs = sample(p.gstar, grid)
    g = sample(p.g, grid)
    return float(np.sqrt(np.sum(grid.weights() * gs**2)) + _w_norm(grid, g) + _FLOOR)


def certificate(pair: FluxPair, tilde_a: TildeA, grid: Grid, p: Optional[DirichletProblem] = None) -> GapReport:
    """Gap, constraint residual (needs ``p``; NaN without it) and ``||j - A(grad_X u)||_{L^2}``."""
    gap = objective(pair, tilde_a, grid)
    res = constraint_residual(pair, p, grid) if p is not None else float("nan")
    diff = pair.j.values - _flux(tilde_a, grid, pair.u)
    match = float(np.sqrt(np.sum(grid.weights() * np.sum(diff**2, axis=0))))
    return GapReport(gap, res, match)


def prox_phi_star(matrix: np.ndarray, z: np.ndarray, rho: float) -> np.ndarray:
    """``argmin_j phi*(j) + rho/2 |j - z|^2`` for ``phi*(j) = j.M^{-1} j / 2`` at every node.

    ``matrix`` has shape ``(..., m, m)`` and ``z`` shape ``(..., m)``; the
    minimiser is ``rho M (I + rho M)^{-1} z``.
    """
    m = z.shape[-1]
    lhs = np.eye(m) + rho * matrix
    sol = np.linalg.solve(lhs, z[..., None])[..., 0]
    return rho * np.einsum("...ij,...j->...i", matrix, sol)


class _QPBlock:
    """Saddle-point solve for the ``(u, q)`` block at fixed penalty ``rho``."""

    def __init__(self, p: DirichletProblem, grid: Grid, mats: np.ndarray, rho: float):
        m = grid.m
        n = grid.size
        free = classify_boundary(grid).free.reshape(-1)
        self.free_idx = np.flatnonzero(free)
        nf = self.free_idx.size
        E = sp.csr_matrix((np.ones(nf), (self.free_idx, np.arange(nf))), shape=(n, nf))
        R = E.T.tocsr()
        w = grid.weights().reshape(-1)
        Gs = sp.vstack(grad_matrices(grid, 1)).tocsr()
        Dv = sp.hstack(grad_matrices(grid, 1)).tocsr()
        T = transport_matrix(grid)
        Hm = sp.diags(np.tile(w, m))
        Hm_inv = sp.diags(1.0 / np.tile(w, m))
        blocks = [[sp.diags(mats[..., k, l].reshape(-1)) for l in range(m)] for k in range(m)]
        Amat = sp.bmat(blocks).tocsr()
        wf = w[self.free_idx]
        Hf = sp.diags(wf)
        self.rho = rho
        self.E, self.R, self.Gs, self.Dv, self.T, self.Hm, self.Hf = E, R, Gs, Dv, T, Hm, Hf
        self.HmA_shift = Hm @ (Amat - sp.identity(m * n) / rho)
        K11 = E.T @ Gs.T @ self.HmA_shift @ Gs @ E
        K21 = Hf @ R @ ((Dv @ Gs) / rho - T) @ E
        K22 = -(Hf @ R @ Dv @ Hm_inv @ Dv.T @ R.T @ Hf) / rho
        K = sp.bmat([[K11, K21.T], [K21, K22]]).tocsc()
        self.lu = spla.splu(K)
        self.nf = nf
        self.Hm_inv = Hm_inv
        self.gstar_f = sample(p.gstar, grid).reshape(-1)[self.free_idx]

    def solve(self, wvec: np.ndarray, lift: np.ndarray):
        E, R, Gs, Dv, T, Hm, Hf, rho = self.E, self.R, self.Gs, self.Dv, self.T, self.Hm, self.Hf, self.rho
        b1 = E.T @ (Gs.T @ (Hm @ wvec)) - E.T @ (Gs.T @ (self.HmA_shift @ (Gs @ lift)))
        b2 = Hf @ (self.gstar_f - R @ (Dv @ wvec) - R @ (Dv @ (Gs @ lift)) / rho + R @ (T @ lift))
        sol = self.lu.solve(np.concatenate([b1, b2]))
        f = sol[: self.nf]
        nu = Hf @ sol[self.nf :]
        u = lift + E @ f
        q = wvec + (Gs @ u - self.Hm_inv @ (Dv.T @ (R.T @ nu))) / rho
        return u, q


def _initial(p: DirichletProblem, grid: Grid, lift: np.ndarray, init: Optional[FluxPair], seed: Optional[int]):
    free = classify_boundary(grid).free
    if init is not None:
        return lift + np.where(free, init.f.values, 0.0), init.j.values.copy()
    if seed is not None:
        rng = np.random.default_rng(seed)
        u = lift + np.where(free, rng.standard_normal(grid.shape), 0.0)
        return u, rng.standard_normal((grid.m,) + grid.shape)
    return lift.copy(), np.zeros((grid.m,) + grid.shape)


def minimize(
    p: DirichletProblem,
    grid: Grid,
    tol: float = 1e-8,
    flux_tol: Optional[float] = None,
    max_iter: int = 2000,
    rho: float = 1.0,
    init: Optional[FluxPair] = None,
    seed: Optional[int] = None,
):
    """Minimise ``J`` over the constraint set; returns ``(pair, report)``.

    Stops when the gap and the constraint residual are below ``tol * scale``
    and the flux mismatch below ``flux_tol * scale`` (default ``100 * tol``).
    The returned pair is the feasible ``(u, q)`` iterate.
    """
    ta = make_tilde_a(p.symbol, check=False)
    if not ta.quadratic:
        raise SymbolError("minimize supports symbols with a quadratic representative only")
    flux_tol = 100 * tol if flux_tol is None else flux_tol
    mats = _matrix_field(ta, grid)
    lift = sample(p.g, grid)
    scale = problem_scale(p, grid)
    w = grid.weights()
    shape_v = (grid.m,) + grid.shape

    u, j = _initial(p, grid, lift, init, seed)
    lift_flat = lift.reshape(-1)
    q = j.copy()
    mu = np.zeros(shape_v)
    block = _QPBlock(p, grid, mats, rho)
    trace = []
    best = None

    def _hnorm(v):
        return float(np.sqrt(np.sum(w * np.sum(v**2, axis=0))))

    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        j = np.moveaxis(prox_phi_star(mats, np.moveaxis(q - mu, 0, -1), block.rho), -1, 0)
        u_flat, q_flat = block.solve((j + mu).reshape(-1), lift_flat)
        q_old = q
        u = u_flat.reshape(grid.shape)
        q = q_flat.reshape(shape_v)
        mu = mu + j - q

        pair = FluxPair(Field(grid, u - lift), VectorField(grid, q), Field(grid, lift))
        rep = certificate(pair, ta, grid, p)
        trace.append(rep.objective)
        if best is None or rep.objective < best[1].objective:
            best = (pair, rep)
        if (
            rep.objective <= tol * scale
            and rep.constraint_residual <= tol * scale
            and rep.flux_match <= flux_tol * scale
        ):
            converged = True
            best = (pair, rep)
            break

        r_norm = _hnorm(j - q)
        s_norm = block.rho * _hnorm(q - q_old)
        if r_norm > 10 * s_norm:
            new_rho = 2 * block.rho
        elif s_norm > 10 * r_norm:
            new_rho = block.rho / 2
        else:
            new_rho = block.rho
        if new_rho != block.rho:
            mu *= block.rho / new_rho
            block = _QPBlock(p, grid, mats, new_rho)

    pair, rep = best
    report = GapReport(rep.objective, rep.constraint_residual, rep.flux_match, it, converged, scale, trace)
    return pair, report
