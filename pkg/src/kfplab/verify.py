"""Regularity functionals evaluated on discrete fields.

Each estimator returns an :class:`EstimateReport` holding the left-hand side,
the data-side quantity without the unknown constant, and their ratio.  Only
boundedness and stability of such ratios are meaningful: the constants in the
underlying inequalities are not known.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .kolgeom import KCylinder, KPoint, cylinder_mask, hom_norm_arrays, origin, relative_arrays
from .mesh import (
    EmptyRegionError,
    Field,
    Grid,
    grad_matrices,
    hminus1_norms,
    transport_matrix,
)
from .viscous import DirichletProblem, SolverOptions, discrete_operator, equation_mask, march, sample

__all__ = [
    "EstimateReport",
    "c01",
    "energy_ratio",
    "higher_integrability",
    "local_boundedness",
    "de_giorgi_levels",
    "harnack_quotient",
    "weak_harnack_quotient",
    "HARNACK_R0",
    "holder_estimate",
    "sample_pairs",
    "comparison_check",
    "w_norm",
    "dual_norm",
    "kolmogorov_kernel",
    "model_kernel_residual",
    "kernel_mass",
]

HARNACK_R0 = 1.0 / 20.0


@dataclass(frozen=True)
class EstimateReport:
    name: str
    lhs: float
    rhs_data: float
    ratio: float
    params: dict = field(default_factory=dict)
    flags: tuple = ()

    def row(self) -> dict:
        """Flat mapping for CSV output."""
        out = {"name": self.name}
        for k in sorted(self.params):
            out[k] = self.params[k]
        out.update(lhs=self.lhs, rhs_data=self.rhs_data, ratio=self.ratio, flags=";".join(self.flags))
        return out


def _report(name, lhs, rhs, params, flags=()):
    flags = tuple(flags)
    if rhs > 0 and np.isfinite(rhs):
        ratio = lhs / rhs
    else:
        ratio = float("nan")
        flags = flags + ("rhs_zero",)
    return EstimateReport(name, float(lhs), float(rhs), float(ratio), params, flags)


def _as_values(u):
    return u.values if isinstance(u, Field) else np.asarray(u, float)


def _check_inside(grid: Grid, center: KPoint, r: float):
    """Raise if the closed cylinder ``Q_r(center)`` is not contained in the domain box."""
    dom = grid.domain
    cx, cy, ct = center.x, center.y, center.t
    lo_t, hi_t = ct - r**2, ct
    ok = dom.t_bounds[0] <= lo_t and hi_t <= dom.t_bounds[1]
    for k in range(grid.m):
        ax, bx = dom.x_bounds[k]
        ay, by = dom.y_bounds[k]
        reach = r**3 + r**2 * abs(cx[k])
        ok &= ax <= cx[k] - r and cx[k] + r <= bx
        ok &= ay <= cy[k] - reach and cy[k] + reach <= by
    if not ok:
        raise ValueError(f"cylinder of radius {r} around {center.as_tuple()} leaves the grid domain")


def _mask(grid: Grid, center: KPoint, r: float) -> np.ndarray:
    _check_inside(grid, center, r)
    x, y, t = grid.coords()
    mask = cylinder_mask(KCylinder(center, r), x, y, t)
    if not mask.any():
        raise EmptyRegionError(f"no grid node inside the cylinder of radius {r}")
    return mask


def _integral(grid: Grid, vals: np.ndarray, mask: np.ndarray) -> float:
    return float(np.sum(np.where(mask, grid.weights() * vals, 0.0)))


def _grad_sq(grid: Grid, vals: np.ndarray) -> np.ndarray:
    flat = vals.reshape(-1)
    return sum(((d @ flat).reshape(grid.shape)) ** 2 for d in grad_matrices(grid, 2))


# -- energy -----------------------------------------------------------------


def c01(r1: float, r0: float, x0_norm: float = 0.0) -> float:
    """Constant of the local energy estimate for radii ``r1 < r0`` and centre with ``|X0| = x0_norm``."""
    d = r0 - r1
    return 1.0 / d**2 + (r0 + x0_norm) / (d * r1**2) + 1.0 / (d * r1) + 1.0


def _check_radii(r1, r0, names=("r1", "r0")):
    if not (0 < r1 < r0 <= 1):
        raise ValueError(f"need 0 < {names[0]} < {names[1]} <= 1, got {r1}, {r0}")


def energy_ratio(u, grid: Grid, center: Optional[KPoint] = None, r1: float = 0.5, r0: float = 1.0,
                 lam: float = 1.0) -> EstimateReport:
    """``sup_t int u^2 + lam^-1 iint |grad_X u|^2`` on ``Q_r1`` against ``c01 * iint u^2`` on ``Q_r0``."""
    _check_radii(r1, r0)
    center = origin(grid.m) if center is None else center
    vals = _as_values(u)
    inner = _mask(grid, center, r1)
    outer = _mask(grid, center, r0)
    sw = grid.slice_weights()
    slices = [float(np.sum(np.where(inner[n], sw * vals[n] ** 2, 0.0))) for n in range(grid.nt) if inner[n].any()]
    sup_part = max(slices)
    grad_part = _integral(grid, _grad_sq(grid, vals), inner) / lam
    c = c01(r1, r0, float(np.linalg.norm(center.x)))
    rhs = c * _integral(grid, vals**2, outer)
    params = {"r1": r1, "r0": r0, "lambda": lam, "c01": c, "center": center.as_tuple(),
              "sup_term": sup_part, "gradient_term": grad_part}
    return _report("energy", sup_part + grad_part, rhs, params)


# -- higher integrability ----------------------------------------------------


def _gagliardo(grid: Grid, vals: np.ndarray, mask: np.ndarray, s: float) -> float:
    """``int_{t,X} ( int_Y |u| + iint_{Y,Y'} |u(Y)-u(Y')| / |Y-Y'|^{m+s} )`` over masked nodes."""
    m = grid.m
    w = grid.weights()
    ny = grid.ny
    ycoords = np.stack(np.meshgrid(*[grid.y_nodes(k) for k in range(m)], indexing="ij"), -1).reshape(-1, m)
    dist = np.linalg.norm(ycoords[:, None, :] - ycoords[None, :, :], axis=-1)
    np.fill_diagonal(dist, np.inf)
    kernel = dist ** (-(m + s))
    ywt = np.ones(())
    for k in range(m):
        trap = np.full(ny, grid.hy[k])
        trap[0] = trap[-1] = 0.5 * grid.hy[k]
        ywt = np.multiply.outer(ywt, trap)
    ywt = ywt.reshape(-1)
    # reorder to (t, X..., Y...) so each column is one (t, X)
    axes = [0] + [grid.x_axis(k) for k in range(m)] + [grid.y_axis(k) for k in range(m)]
    v = np.transpose(vals, axes).reshape(-1, ywt.size)
    mk = np.transpose(mask, axes).reshape(-1, ywt.size)
    wt = np.transpose(w, axes).reshape(-1, ywt.size) / ywt  # (t, X) weight per column
    total = 0.0
    for col in np.flatnonzero(mk.any(axis=1)):
        sel = mk[col]
        vc = v[col, sel]
        yw = ywt[sel]
        semi = np.abs(vc[:, None] - vc[None, :]) * kernel[np.ix_(sel, sel)]
        inner = np.sum(yw * np.abs(vc)) + yw @ semi @ yw
        total += wt[col, sel][0] * inner
    return float(total)


def higher_integrability(u, grid: Grid, q: float = 2.5, s: float = 0.2, center: Optional[KPoint] = None,
                         r1: float = 0.5, r0: float = 1.0) -> EstimateReport:
    """``||u||_{L^q(Q_r1)} / ||u||_{L^2(Q_r0)}``; the ``L^1_{t,X} W^{s,1}_Y`` ratio is in ``params``."""
    m = grid.m
    if not (2 <= q < 2 + 1.0 / m):
        raise ValueError(f"q must lie in [2, 2 + 1/m), got {q}")
    if not (0 <= s < 1.0 / 3.0):
        raise ValueError(f"s must lie in [0, 1/3), got {s}")
    _check_radii(r1, r0)
    center = origin(m) if center is None else center
    vals = _as_values(u)
    inner = _mask(grid, center, r1)
    outer = _mask(grid, center, r0)
    lq = _integral(grid, np.abs(vals) ** q, inner) ** (1.0 / q)
    l2 = np.sqrt(_integral(grid, vals**2, outer))
    frac = _gagliardo(grid, vals, inner, s)
    params = {"q": q, "s": s, "r1": r1, "r0": r0, "center": center.as_tuple(), "fractional_norm": frac,
              "fractional_ratio": frac / l2 if l2 > 0 else float("nan")}
    return _report("higher_integrability", lq, l2, params)


# -- local boundedness -------------------------------------------------------


def local_boundedness(u, grid: Grid, p: float = 2.0, center: Optional[KPoint] = None, r_inf: float = 0.5,
                      r0: float = 1.0) -> EstimateReport:
    """``sup_{Q_rinf} u`` against ``((1+|X0|)/(rinf^2 (r0-rinf)^3))^{1/p} ||u||_{L^p(Q_r0)}``."""
    if not p > 0:
        raise ValueError("p must be positive")
    _check_radii(r_inf, r0, ("r_inf", "r0"))
    center = origin(grid.m) if center is None else center
    vals = _as_values(u)
    inner = _mask(grid, center, r_inf)
    outer = _mask(grid, center, r0)
    lhs = float(np.max(vals[inner]))
    lp = _integral(grid, np.abs(vals) ** p, outer) ** (1.0 / p)
    factor = ((1 + np.linalg.norm(center.x)) / (r_inf**2 * (r0 - r_inf) ** 3)) ** (1.0 / p)
    params = {"p": p, "r_inf": r_inf, "r0": r0, "theta": 1.0, "center": center.as_tuple(), "lp_norm": lp}
    return _report("local_boundedness", lhs, factor * lp, params)


def de_giorgi_levels(u, grid: Grid, r_inf: float = 0.5, r0: float = 1.0, n_levels: int = 8) -> list:
    """``[(n, r_n, k_n, A_n)]`` with ``A_n = sup_{t in (T_n, 0)} int (u - k_n)_+^2`` over ``B(r_n) x B(r_n^3)``."""
    _check_radii(r_inf, r0, ("r_inf", "r0"))
    vals = _as_values(u)
    x, y, t = grid.coords()
    sw = grid.slice_weights()
    nx_ = np.linalg.norm(x, axis=-1)
    ny_ = np.linalg.norm(y, axis=-1)
    out = []
    for n in range(n_levels + 1):
        rn = r_inf + (r0 - r_inf) * 2.0**-n
        kn = 0.5 * (1 - 2.0**-n)
        mask = (nx_ < rn) & (ny_ < rn**3) & (t > -(rn**2)) & (t < 0)
        excess = np.where(mask, np.maximum(vals - kn, 0.0) ** 2, 0.0)
        levels = [float(np.sum(sw * excess[i])) for i in range(grid.nt) if mask[i].any()]
        out.append((n, rn, kn, max(levels) if levels else 0.0))
    return out


# -- Harnack ----------------------------------------------------------------


def _harnack_sets(grid: Grid, radius: float):
    m = grid.m
    lower = KPoint(np.zeros(m), np.zeros(m), -19.0 * HARNACK_R0**2 / 8.0)
    return _mask(grid, lower, radius), _mask(grid, origin(m), radius)


def _resolved(grid: Grid, radius: float) -> bool:
    """Whether every direction of a radius-``radius`` cylinder spans at least one cell."""
    return 2 * radius >= max(grid.hx) and 2 * radius**3 >= max(grid.hy) and radius**2 >= grid.ht


def _nonneg_check(vals, mask, tol):
    return float(np.min(vals[mask])) >= -tol


def harnack_quotient(u, grid: Grid, tol: float = 1e-12) -> EstimateReport:
    """``sup`` over the earlier cylinder of radius ``r0/4`` divided by ``inf`` over ``Q_{r0/4}``."""
    vals = _as_values(u)
    r = HARNACK_R0 / 4
    earlier, later = _harnack_sets(grid, r)
    sup = float(np.max(vals[earlier]))
    inf = float(np.min(vals[later]))
    flags = []
    if not _nonneg_check(vals, earlier | later, tol):
        flags.append("negative_values")
    if not _resolved(grid, r):
        flags.append("under_resolved")
    if inf <= 0:
        flags.append("nonpositive_inf")
        return EstimateReport("harnack", sup, inf, float("nan"), {"radius": r}, tuple(flags))
    return EstimateReport("harnack", sup, inf, sup / inf, {"radius": r}, tuple(flags))


def weak_harnack_quotient(u, grid: Grid, zeta: float = 0.5, tol: float = 1e-12) -> EstimateReport:
    """``(iint u^zeta)^{1/zeta}`` over the earlier cylinder of radius ``r0/2`` divided by ``inf`` over ``Q_{r0/2}``."""
    if not zeta > 0:
        raise ValueError("zeta must be positive")
    vals = _as_values(u)
    r = HARNACK_R0 / 2
    earlier, later = _harnack_sets(grid, r)
    flags = []
    if not _nonneg_check(vals, earlier | later, tol):
        flags.append("negative_values")
    if not _resolved(grid, r):
        flags.append("under_resolved")
    lz = _integral(grid, np.maximum(vals, 0.0) ** zeta, earlier) ** (1.0 / zeta)
    inf = float(np.min(vals[later]))
    if inf <= 0:
        flags.append("nonpositive_inf")
        return EstimateReport("weak_harnack", lz, inf, float("nan"), {"radius": r, "zeta": zeta}, tuple(flags))
    return EstimateReport("weak_harnack", lz, inf, lz / inf, {"radius": r, "zeta": zeta}, tuple(flags))


# -- Hoelder ----------------------------------------------------------------


def sample_pairs(grid: Grid, n_pairs: int = 10_000, seed: int = 0, d_range: Optional[tuple] = None,
                 anchor: Optional[KPoint] = None, region: Optional[KCylinder] = None,
                 composition: str = "mixed") -> np.ndarray:
    """Node index pairs ``(k_a, k_b)`` (flat indices) with target quasi-distance log-uniform in ``d_range``.

    With ``composition="mixed"`` the target displacement ``P`` has
    homogeneous norm ``d`` split at random among its ``X``, ``Y`` and ``t``
    parts and ``b`` is the node nearest to ``a o P``; the realised distance can
    differ from the target because ``Y`` and ``t`` are coarse in the
    homogeneous scale.  With ``composition="x"`` the pair differs only in
    ``X`` (same ``Y`` and ``t`` indices).  Both nodes lie in ``region``
    (default ``Q_1``).  With ``anchor`` every pair starts at the node nearest
    to the anchor, which itself need not lie in the region.
    """
    if composition not in ("mixed", "x"):
        raise ValueError("composition must be 'mixed' or 'x'")
    m = grid.m
    rng = np.random.default_rng(seed)
    region = KCylinder(origin(m), 1.0) if region is None else region
    h = min(grid.hx)
    lo, hi = (4 * h, 0.5) if d_range is None else d_range
    x, y, t = grid.coords()
    inside = cylinder_mask(region, x, y, t).reshape(-1)
    cand = np.flatnonzero(inside)
    if cand.size < 2:
        raise ValueError("region holds fewer than two nodes")
    xs, ys, ts = x.reshape(-1, m), y.reshape(-1, m), t.reshape(-1)
    if anchor is not None:
        a_idx = _nearest(grid, anchor.x[None], anchor.y[None], np.array([anchor.t]))[0]
        if a_idx < 0:
            raise ValueError("anchor lies outside the grid")
    out = []
    batch = max(4 * n_pairs, 1000)
    for _ in range(200):
        a = cand[rng.integers(0, cand.size, batch)] if anchor is None else np.full(batch, a_idx)
        d = np.exp(rng.uniform(np.log(lo), np.log(hi), batch))
        if composition == "x":
            share = np.zeros((batch, 3))
            share[:, 0] = d
        else:
            share = rng.dirichlet(np.ones(3), batch) * d[:, None]
        dx = _random_dirs(rng, batch, m) * share[:, :1]
        dy = _random_dirs(rng, batch, m) * share[:, 1:2] ** 3
        dt = rng.choice([-1.0, 1.0], batch) * share[:, 2] ** 2
        bx = xs[a] + dx
        by = ys[a] + dy + dt[:, None] * xs[a]
        bt = ts[a] + dt
        b = _nearest(grid, bx, by, bt)
        ok = (b >= 0) & (b != a)
        ok[ok] &= inside[b[ok]]
        out.extend(zip(a[ok], b[ok]))
        if len(out) >= n_pairs:
            break
    return np.array(out[:n_pairs], dtype=np.int64).reshape(-1, 2)


def _random_dirs(rng, n, m):
    v = rng.standard_normal((n, m))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _nearest(grid: Grid, x, y, t):
    """Flat index of the nearest node, -1 outside the domain."""
    m = grid.m
    dom = grid.domain
    idx = []
    valid = np.ones(len(t), bool)

    def snap(v, a, b, n):
        i = np.rint((v - a) / (b - a) * (n - 1)).astype(np.int64)
        return i, (i >= 0) & (i < n)

    it, ok = snap(t, *dom.t_bounds, grid.nt)
    idx.append(it)
    valid &= ok
    for k in range(m):
        i, ok = snap(y[:, k], *dom.y_bounds[k], grid.ny)
        idx.append(i)
        valid &= ok
    for k in range(m):
        i, ok = snap(x[:, k], *dom.x_bounds[k], grid.nx)
        idx.append(i)
        valid &= ok
    idx = [np.where(valid, i, 0) for i in idx]
    flat = np.ravel_multi_index(idx, grid.shape)
    return np.where(valid, flat, -1)


def holder_estimate(u, grid: Grid, pairs: Optional[np.ndarray] = None, seed: int = 0, min_pairs: int = 10):
    """Least-squares slope of ``log|u(a) - u(b)|`` against ``log d(a, b)``.

    Pairs closer than ``2 hX`` and pairs with equal values are dropped.
    Returns ``(alpha_fit, seminorm)`` with ``seminorm = max |du| / d^alpha``;
    ``alpha_fit`` is NaN (and seminorm 0) when every difference vanishes.
    """
    vals = _as_values(u).reshape(-1)
    if pairs is None:
        pairs = sample_pairs(grid, seed=seed)
    pairs = np.asarray(pairs, dtype=np.int64)
    m = grid.m
    x, y, t = grid.coords()
    xs, ys, ts = x.reshape(-1, m), y.reshape(-1, m), t.reshape(-1)
    a, b = pairs[:, 0], pairs[:, 1]
    if np.any(a == b):
        raise ValueError("pairs must be distinct nodes")
    rx, ry, rt = relative_arrays(xs[b], ys[b], ts[b], xs[a], ys[a], ts[a])
    d = hom_norm_arrays(rx, ry, rt)
    du = np.abs(vals[a] - vals[b])
    keep = d >= 2 * min(grid.hx)
    if keep.sum() < min_pairs:
        raise ValueError(f"fewer than {min_pairs} admissible pairs")
    d, du = d[keep], du[keep]
    nz = du > 0
    if nz.sum() < min_pairs:
        return float("nan"), 0.0
    slope, _ = np.polyfit(np.log(d[nz]), np.log(du[nz]), 1)
    semi = float(np.max(du / d**slope))
    return float(slope), semi


# -- comparison ---------------------------------------------------------------


def comparison_check(p: DirichletProblem, u_sub, grid: Grid, sub_tol: Optional[float] = 1e-8,
                     options: SolverOptions = SolverOptions()) -> float:
    """``max(u_sub - v)`` where ``v`` solves ``p`` with boundary data taken from ``u_sub``.

    With ``sub_tol`` set, ``u_sub`` must first pass the sub-solution test
    ``L u_sub - g* >= -sub_tol`` at all equation nodes.
    """
    vals = _as_values(u_sub)
    eps = p.eps_for(grid)
    if sub_tol is not None:
        r = discrete_operator(p.symbol, grid, vals, eps) - sample(p.gstar, grid)
        worst = float(np.min(r[equation_mask(grid, eps)]))
        if worst < -sub_tol:
            raise ValueError(f"u_sub is not a sub-solution: residual reaches {worst:.3e}")
    lifted = _NodalData(grid, vals)
    q = DirichletProblem(p.domain, p.symbol, lifted, p.gstar, eps)
    rep = march(q, grid, options)
    if not rep.converged:
        raise RuntimeError(f"comparison solve failed: {rep.message}")
    return float(np.max(vals - rep.field.values))


class _NodalData:
    """Callable returning stored nodal values when evaluated on the matching grid."""

    def __init__(self, grid: Grid, vals: np.ndarray):
        self.grid = grid
        self.vals = vals

    def __call__(self, x, y, t):
        if np.shape(t) != self.grid.shape:
            raise ValueError("nodal data can only be sampled on its own grid")
        return self.vals


# -- W norm -----------------------------------------------------------------


def _yt_weights(grid: Grid) -> np.ndarray:
    w = grid.weights()
    lead = w.shape[: 1 + grid.m]
    return w.reshape(lead + (-1,)).sum(axis=-1) / grid.x_weights().sum()


def dual_norm(v, grid: Grid) -> float:
    """``L^2_{Y,t}(H^{-1}_X)`` norm: slice-wise dual norms combined with the ``(Y, t)`` weights."""
    vals = _as_values(v)
    return float(np.sqrt(np.sum(_yt_weights(grid) * hminus1_norms(vals, grid) ** 2)))


def w_norm(u, grid: Grid) -> float:
    """``sqrt(||u||^2_{L^2(H^1_X)} + ||transport u||^2_{L^2(H^-1_X)})``."""
    vals = _as_values(u)
    w = grid.weights()
    flat = vals.reshape(-1)
    h1 = float(np.sum(w * vals**2))
    for d in grad_matrices(grid, 1):
        h1 += float(np.sum(w * (d @ flat).reshape(grid.shape) ** 2))
    tr = (transport_matrix(grid) @ flat).reshape(grid.shape)
    return float(np.sqrt(h1 + dual_norm(tr, grid) ** 2))


# -- model kernel -------------------------------------------------------------


def kolmogorov_kernel(x, y, t):
    """Fundamental solution of ``d/dt + X . grad_Y - Delta_X`` with pole at the origin, ``t > 0``.

    In each coordinate pair the law is Gaussian with covariance
    ``[[2t, t^2], [t^2, 2t^3/3]]``; the kernel is the product over pairs.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    t = np.asarray(t, float)[..., None]
    if np.any(t <= 0):
        raise ValueError("kernel needs t > 0")
    q = x**2 / t - 3 * x * y / t**2 + 3 * y**2 / t**3
    return np.prod(np.sqrt(3.0) / (2 * np.pi * t**2) * np.exp(-q), axis=-1)


def _kernel_field(grid: Grid) -> np.ndarray:
    if grid.domain.t_bounds[0] <= 0:
        raise ValueError("the kernel is singular at t = 0; the grid must satisfy t0 > 0")
    x, y, t = grid.coords()
    return kolmogorov_kernel(x, y, t)


def model_kernel_residual(grid: Grid) -> float:
    """Max of ``|(transport - Delta_X) K|`` at nodes two cells away from every face.

    Uses second-order centred differences in ``(Y, t)`` and the ``X``-stencil
    of the solvers.
    """
    k = _kernel_field(grid)
    flat = k.reshape(-1)
    lap = sum(d @ (d @ flat) for d in grad_matrices(grid, 1))
    r = (transport_matrix(grid, "centered") @ flat - lap).reshape(grid.shape)
    core = tuple(slice(2, n - 2) for n in grid.shape)
    return float(np.max(np.abs(r[core])))


def kernel_mass(grid: Grid) -> np.ndarray:
    """``iint K dX dY`` on every time level (trapezoid)."""
    k = _kernel_field(grid)
    sw = grid.slice_weights()
    return np.array([np.sum(sw * k[n]) for n in range(grid.nt)])
