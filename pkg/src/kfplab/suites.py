"""Reproducible problem families shared by the CLI and the test-suite.

Each family is a list of :class:`viscous.DirichletProblem` built from the
data catalog with fixed seeds, so that fixture constants measured once stay
meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .catalog import make_data
from .mesh import BoxDomain, Grid, build_grid
from .symbol import checkerboard_symbol, identity_symbol, spd_symbol
from .viscous import DirichletProblem, SolverOptions, march, sample
from .verify import comparison_check, dual_norm, w_norm

__all__ = [
    "VERIFY_DOMAIN",
    "HARNACK_DOMAIN",
    "estimate_family",
    "harnack_family",
    "comparison_cases",
    "ComparisonCase",
    "run_comparison_suite",
    "solve_family",
    "data_norms",
]

VERIFY_DOMAIN = BoxDomain(((-1.25, 1.25),), ((-1.25, 1.25),), (-1.25, 0.25))
"""Box containing ``Q_1`` with room to spare; used by the estimate families."""

HARNACK_DOMAIN = BoxDomain(((-0.1, 0.1),), ((-1e-3, 1e-3),), (-0.01, 0.0025))
"""Box just containing both Harnack cylinders for ``r0 = 1/20``."""


def _symbols_m1():
    return [identity_symbol(1), checkerboard_symbol(1), spd_symbol(np.array([[2.0]]))]


def estimate_family(n: int = 10, domain: BoxDomain = VERIFY_DOMAIN) -> list:
    """``n`` sub-solution problems with positive boundary data and a nonnegative source.

    Symbols cycle through identity, checkerboard and ``2 I``; the source is a
    bump of amplitude at most ``0.5`` placed at random in ``Q_1``.
    """
    syms = _symbols_m1()
    out = []
    for i in range(n):
        rng = np.random.default_rng(1000 + i)
        g = make_data("positive_random", 1, seed=1000 + i, floor=0.3)
        gs = make_data("bump", 1, amp=float(rng.uniform(0.0, 0.5)), width=0.4,
                       cx=float(rng.uniform(-0.5, 0.5)), cy=float(rng.uniform(-0.5, 0.5)),
                       ct=float(rng.uniform(-0.8, -0.2)))
        out.append(DirichletProblem(domain, syms[i % 3], g, gs))
    return out


def harnack_family(n: int = 5, domain: BoxDomain = HARNACK_DOMAIN) -> list:
    """``n`` source-free problems with boundary data bounded below by ``0.2``.

    The oscillation scales follow the box so each datum varies in every
    direction.
    """
    (xb,), (yb,), tb = domain.x_bounds, domain.y_bounds, domain.t_bounds
    syms = [identity_symbol(1), spd_symbol(np.array([[2.0]]))]
    out = []
    for i in range(n):
        g = make_data("positive_random", 1, seed=2000 + i, floor=0.2,
                      sx=xb[1] - xb[0], sy=yb[1] - yb[0], st=tb[1] - tb[0])
        out.append(DirichletProblem(domain, syms[i % 2], g, 0.0))
    return out


@dataclass(frozen=True)
class ComparisonCase:
    """A problem ``p`` and an explicit sub-solution ``u_sub`` of it on ``grid``."""

    problem: DirichletProblem
    grid: Grid
    u_sub: np.ndarray
    delta: float


def comparison_cases(n: int = 20, seed: int = 0, nx: int = 17, ny: int = 17, nt: int = 9) -> list:
    """Randomised linear ``m = 1`` problems paired with strict sub-solutions.

    For each case ``v`` solves the problem and ``phi`` solves the same
    equation with unit source and zero data, so ``phi <= 0`` and
    ``u_sub = v + delta * (phi - 1)`` satisfies ``L u_sub = g* + delta`` with
    data ``g - delta``: a strict sub-solution lying below the data.
    """
    rng = np.random.default_rng(seed)
    dom = BoxDomain(((-1.0, 1.0),), ((-1.0, 1.0),), (0.0, 1.0))
    grid = build_grid(dom, nx, ny, nt)
    syms = _symbols_m1()
    cases = []
    for i in range(n):
        sym = syms[i % 3]
        delta = float(rng.uniform(0.1, 1.0))
        g = make_data("positive_random", 1, seed=int(rng.integers(1 << 30)), floor=0.1)
        gs = make_data("sines", 1, amp=float(rng.uniform(-1, 1)), kx=float(rng.integers(1, 3)),
                       ky=float(rng.integers(0, 3)), kt=1.0, offset=float(rng.uniform(-1, 1)))
        p = DirichletProblem(dom, sym, g, gs)
        v = march(p, grid).field.values
        # phi: L phi = 1 with zero data, so phi <= 0 and v + delta*phi has L = g* + delta
        bump = march(DirichletProblem(dom, sym, 0.0, 1.0, p.eps_for(grid)), grid).field.values
        cases.append(ComparisonCase(p, grid, v + delta * (bump - 1.0), delta))
    return cases


def run_comparison_suite(n: int = 20, seed: int = 0, options: SolverOptions = SolverOptions()) -> list:
    """``[(case index, delta, max(u_sub - v))]`` for :func:`comparison_cases`."""
    out = []
    for i, case in enumerate(comparison_cases(n, seed)):
        out.append((i, case.delta, comparison_check(case.problem, case.u_sub, case.grid, options=options)))
    return out


def solve_family(problems: list, grid_shape: tuple, options: SolverOptions = SolverOptions()) -> list:
    """``[(problem, grid, values)]`` for every problem on a grid of ``grid_shape = (nx, ny, nt)``."""
    out = []
    for p in problems:
        grid = build_grid(p.domain, *grid_shape)
        rep = march(p, grid, options)
        if not rep.converged:
            raise RuntimeError(rep.message)
        out.append((p, grid, rep.field.values))
    return out


def data_norms(p: DirichletProblem, grid: Grid):
    """``(w_norm(g sampled), dual_norm(g*))`` on ``grid``."""
    return w_norm(sample(p.g, grid), grid), dual_norm(sample(p.gstar, grid), grid)

