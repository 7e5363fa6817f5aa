"""Tensor space-time grids over boxes, Kolmogorov-boundary tags, and the
discrete operators used by both solvers.

Node values are stored in arrays of shape ``(nt, ny, ..., ny, nx, ..., nx)``:
axis 0 is time, axes ``1..m`` are ``y_1..y_m`` and axes ``m+1..2m`` are
``x_1..x_m``.  Flattening is C-order, so the last ``x`` index varies fastest.

Operators are sparse matrices built from one-dimensional difference matrices
by Kronecker products and cached per grid.  Two first-derivative stencils in
``X`` are available:

* ``edge_order=2``: centred in the interior, second-order one-sided at the
  ``X``-boundary (the default of :func:`grad_x`);
* ``edge_order=1``: centred in the interior, first-order one-sided at the
  boundary.  This one forms a summation-by-parts pair with :func:`div_x`
  under the trapezoid inner product and is the one used by the solvers.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from enum import IntEnum
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .kolgeom import KCylinder, KPoint, cylinder_mask

__all__ = [
    "BoxDomain",
    "Grid",
    "Field",
    "VectorField",
    "Tag",
    "BoundaryClass",
    "EmptyRegionError",
    "build_grid",
    "classify_boundary",
    "grad_x",
    "div_x",
    "transport",
    "laplace_y",
    "integrate",
    "inner",
    "hminus1_norm",
    "hminus1_norms",
    "hminus1_riesz",
    "region_mask",
]


class EmptyRegionError(ValueError):
    """Raised when an integration region contains no grid node."""


def _interval(iv, what):
    a, b = (float(v) for v in iv)
    if not (np.isfinite(a) and np.isfinite(b) and a < b):
        raise ValueError(f"degenerate or non-finite {what} interval {iv!r}")
    return a, b


@dataclass(frozen=True)
class BoxDomain:
    """``U_X x U_Y x (t0, t1)`` with ``U_X, U_Y`` boxes in ``R^m``."""

    x_bounds: tuple
    y_bounds: tuple
    t_bounds: tuple

    def __post_init__(self):
        xb = tuple(_interval(iv, "x") for iv in self.x_bounds)
        yb = tuple(_interval(iv, "y") for iv in self.y_bounds)
        if len(xb) != len(yb) or not xb:
            raise ValueError("x_bounds and y_bounds need the same number m >= 1 of intervals")
        object.__setattr__(self, "x_bounds", xb)
        object.__setattr__(self, "y_bounds", yb)
        object.__setattr__(self, "t_bounds", _interval(self.t_bounds, "t"))

    @property
    def m(self) -> int:
        return len(self.x_bounds)

    @classmethod
    def cube(cls, m: int = 1, x=(-1.0, 1.0), y=(-1.0, 1.0), t=(0.0, 1.0)) -> "BoxDomain":
        return cls((tuple(x),) * m, (tuple(y),) * m, tuple(t))

    def bounds_vector(self) -> np.ndarray:
        """Flat bounds ``(x1a, x1b, ..., y1a, y1b, ..., t0, t1)``."""
        parts = [v for iv in self.x_bounds for v in iv] + [v for iv in self.y_bounds for v in iv]
        return np.array(parts + list(self.t_bounds), dtype=float)

    @classmethod
    def from_bounds_vector(cls, m: int, vec) -> "BoxDomain":
        vec = [float(v) for v in vec]
        if len(vec) != 4 * m + 2:
            raise ValueError("bounds vector has wrong length")
        xb = tuple((vec[2 * k], vec[2 * k + 1]) for k in range(m))
        yb = tuple((vec[2 * m + 2 * k], vec[2 * m + 2 * k + 1]) for k in range(m))
        return cls(xb, yb, (vec[4 * m], vec[4 * m + 1]))


def _nodes(a: float, b: float, n: int) -> np.ndarray:
    # endpoint-exact and symmetric: midpoint of a symmetric interval is exactly 0
    i = np.arange(n, dtype=float)
    return (a * (n - 1 - i) + b * i) / (n - 1)


@dataclass(frozen=True)
class Grid:
    domain: BoxDomain
    nx: int
    ny: int
    nt: int

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3 or self.nt < 2:
            raise ValueError(f"need nx, ny >= 3 and nt >= 2, got nx={self.nx}, ny={self.ny}, nt={self.nt}")

    @property
    def m(self) -> int:
        return self.domain.m

    @property
    def shape(self) -> tuple:
        return (self.nt,) + (self.ny,) * self.m + (self.nx,) * self.m

    @property
    def slice_shape(self) -> tuple:
        return self.shape[1:]

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def hx(self) -> tuple:
        return tuple((b - a) / (self.nx - 1) for a, b in self.domain.x_bounds)

    @property
    def hy(self) -> tuple:
        return tuple((b - a) / (self.ny - 1) for a, b in self.domain.y_bounds)

    @property
    def ht(self) -> float:
        t0, t1 = self.domain.t_bounds
        return (t1 - t0) / (self.nt - 1)

    @property
    def t_nodes(self) -> np.ndarray:
        return _nodes(*self.domain.t_bounds, self.nt)

    def x_nodes(self, k: int) -> np.ndarray:
        return _nodes(*self.domain.x_bounds[k], self.nx)

    def y_nodes(self, k: int) -> np.ndarray:
        return _nodes(*self.domain.y_bounds[k], self.ny)

    def x_axis(self, k: int) -> int:
        return 1 + self.m + k

    def y_axis(self, k: int) -> int:
        return 1 + k

    def node(self, index: Sequence[int]) -> KPoint:
        """Coordinates of the node with index ``(it, iy_1.., ix_1..)``."""
        index = tuple(int(i) for i in index)
        if len(index) != 1 + 2 * self.m:
            raise ValueError("index needs 1 + 2m entries")
        m = self.m
        t = self.t_nodes[index[0]]
        y = [self.y_nodes(k)[index[1 + k]] for k in range(m)]
        x = [self.x_nodes(k)[index[1 + m + k]] for k in range(m)]
        return KPoint(x, y, t)

    def coords(self):
        """Broadcast node coordinates ``(x, y, t)`` of shapes ``shape+(m,)``, ``shape+(m,)``, ``shape``."""
        return _coords(self)

    def weights(self) -> np.ndarray:
        """Trapezoid tensor quadrature weights on all nodes."""
        return _weights(self)

    def slice_weights(self) -> np.ndarray:
        """Trapezoid weights of one time level (``Y, X`` only)."""
        return _weights(self)[0] / _trap(self.nt, self.ht)[0]

    def x_weights(self) -> np.ndarray:
        """Trapezoid weights on the ``X``-grid of one ``(Y, t)`` slice."""
        w = np.ones(())
        for k in range(self.m):
            w = np.multiply.outer(w, _trap(self.nx, self.hx[k]))
        return w


def build_grid(domain: BoxDomain, nx: int, ny: int, nt: int) -> Grid:
    return Grid(domain, int(nx), int(ny), int(nt))


def _trap(n, h):
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


@functools.lru_cache(maxsize=16)
def _coords(grid: Grid):
    m = grid.m
    axes = [grid.t_nodes] + [grid.y_nodes(k) for k in range(m)] + [grid.x_nodes(k) for k in range(m)]
    mesh = np.meshgrid(*axes, indexing="ij")
    t = mesh[0]
    y = np.stack(mesh[1 : 1 + m], axis=-1)
    x = np.stack(mesh[1 + m :], axis=-1)
    for a in (t, x, y):
        a.flags.writeable = False
    return x, y, t


@functools.lru_cache(maxsize=16)
def _weights(grid: Grid):
    w = _trap(grid.nt, grid.ht)
    for k in range(grid.m):
        w = np.multiply.outer(w, _trap(grid.ny, grid.hy[k]))
    for k in range(grid.m):
        w = np.multiply.outer(w, _trap(grid.nx, grid.hx[k]))
    w.flags.writeable = False
    return w


# -- fields -----------------------------------------------------------------


@dataclass(frozen=True)
class Field:
    """Nodal values on a grid, array shape ``grid.shape``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size != self.grid.size:
            raise ValueError(f"field needs {self.grid.size} values, got {v.size}")
        object.__setattr__(self, "values", v.reshape(self.grid.shape))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable) -> "Field":
        """Sample ``fn(x, y, t)`` (vectorised, ``x, y`` with trailing axis m)."""
        x, y, t = grid.coords()
        return cls(grid, np.broadcast_to(np.asarray(fn(x, y, t), float), grid.shape).copy())

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.shape))

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)


@dataclass(frozen=True)
class VectorField:
    """``m`` values per node, array shape ``(m,) + grid.shape``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size != self.grid.m * self.grid.size:
            raise ValueError("vector field needs m values per node")
        object.__setattr__(self, "values", v.reshape((self.grid.m,) + self.grid.shape))

    def component(self, k: int) -> Field:
        return Field(self.grid, self.values[k])

    def pointwise(self) -> np.ndarray:
        """Values with the component axis last, shape ``grid.shape + (m,)``."""
        return np.moveaxis(self.values, 0, -1)


def _values(u) -> np.ndarray:
    return u.values if isinstance(u, (Field, VectorField)) else np.asarray(u, float)


# -- boundary classification ------------------------------------------------


class Tag(IntEnum):
    INTERIOR = 0
    GAMMA = 1
    SIGMA_MINUS = 2
    SIGMA_ZERO = 3
    SIGMA_PLUS = 4


@dataclass(frozen=True)
class BoundaryClass:
    grid: Grid
    tags: np.ndarray

    @property
    def kolmogorov(self) -> np.ndarray:
        """Mask of ``Gamma u Sigma^-``: nodes carrying Dirichlet data."""
        return (self.tags == Tag.GAMMA) | (self.tags == Tag.SIGMA_MINUS)

    @property
    def free(self) -> np.ndarray:
        return ~self.kolmogorov

    def count(self, tag: Tag) -> int:
        return int(np.sum(self.tags == tag))


def classify_boundary(grid: Grid) -> BoundaryClass:
    """Tag nodes by the sign of ``(X, 1).N`` on the faces of the ``(Y, t)`` box.

    ``X``-lateral faces are ``Gamma``.  Elsewhere any inflow face makes the
    node ``SigmaMinus``; otherwise a tangential face gives ``SigmaZero`` and an
    outflow face ``SigmaPlus``.
    """
    return _classify(grid)


@functools.lru_cache(maxsize=16)
def _classify(grid: Grid) -> BoundaryClass:
    m = grid.m
    shape = grid.shape
    x, _, _ = grid.coords()
    idx = np.indices(shape, sparse=True)
    gamma = np.zeros(shape, bool)
    for k in range(m):
        ix = idx[grid.x_axis(k)]
        gamma = gamma | (ix == 0) | (ix == grid.nx - 1)
    neg = np.zeros(shape, bool)
    zero = np.zeros(shape, bool)
    pos = np.zeros(shape, bool)
    it = idx[0]
    neg = neg | (it == 0)
    pos = pos | (it == grid.nt - 1)
    for k in range(m):
        iy = idx[grid.y_axis(k)]
        xk = x[..., k]
        for face, sign in ((iy == 0, -1.0), (iy == grid.ny - 1, 1.0)):
            s = sign * xk
            neg = neg | (face & (s < 0))
            zero = zero | (face & (s == 0))
            pos = pos | (face & (s > 0))
    tags = np.full(shape, Tag.INTERIOR, dtype=np.int8)
    tags[pos] = Tag.SIGMA_PLUS
    tags[zero] = Tag.SIGMA_ZERO
    tags[neg] = Tag.SIGMA_MINUS
    tags[gamma] = Tag.GAMMA
    tags.flags.writeable = False
    return BoundaryClass(grid, tags)


# -- one-dimensional stencils -----------------------------------------------


def _d1(n: int, h: float, kind: str) -> sp.csr_matrix:
    """First-derivative matrices on ``n`` uniform nodes."""
    if kind in ("c1", "c2"):
        main = sp.diags([-np.ones(n - 1), np.ones(n - 1)], [-1, 1], shape=(n, n), format="lil") / (2 * h)
        if kind == "c1":
            main[0, :2] = np.array([-1.0, 1.0]) / h
            main[n - 1, n - 2 :] = np.array([-1.0, 1.0]) / h
        else:
            main[0, :3] = np.array([-1.5, 2.0, -0.5]) / h
            main[n - 1, n - 3 :] = np.array([0.5, -2.0, 1.5]) / h
        return main.tocsr()
    if kind == "back":
        d = sp.diags([-np.ones(n - 1), np.ones(n)], [-1, 0], shape=(n, n), format="lil") / h
        d[0, :2] = np.array([-1.0, 1.0]) / h
        return d.tocsr()
    if kind == "fwd":
        d = sp.diags([-np.ones(n), np.ones(n - 1)], [0, 1], shape=(n, n), format="lil") / h
        d[n - 1, n - 2 :] = np.array([-1.0, 1.0]) / h
        return d.tocsr()
    if kind == "lap":
        d = sp.diags([np.ones(n - 1), -2 * np.ones(n), np.ones(n - 1)], [-1, 0, 1], shape=(n, n), format="lil")
        d[0, :3] = np.array([1.0, -2.0, 1.0])
        d[n - 1, n - 3 :] = np.array([1.0, -2.0, 1.0])
        return (d / h**2).tocsr()
    raise ValueError(kind)


def _axis_op(shape: tuple, axis: int, mat) -> sp.csr_matrix:
    out = None
    for ax, n in enumerate(shape):
        factor = mat if ax == axis else sp.identity(n, format="csr")
        out = factor if out is None else sp.kron(out, factor, format="csr")
    return out.tocsr()


@functools.lru_cache(maxsize=32)
def grad_matrices(grid: Grid, edge_order: int = 1, time_axis: bool = True) -> tuple:
    """Sparse ``d/dx_k`` matrices on the full grid (or one time level)."""
    if edge_order not in (1, 2):
        raise ValueError("edge_order must be 1 or 2")
    shape = grid.shape if time_axis else grid.slice_shape
    off = 0 if time_axis else 1
    kind = "c1" if edge_order == 1 else "c2"
    return tuple(
        _axis_op(shape, grid.x_axis(k) - off, _d1(grid.nx, grid.hx[k], kind)) for k in range(grid.m)
    )


@functools.lru_cache(maxsize=32)
def laplace_y_matrix(grid: Grid, time_axis: bool = True) -> sp.csr_matrix:
    shape = grid.shape if time_axis else grid.slice_shape
    off = 0 if time_axis else 1
    mats = [_axis_op(shape, grid.y_axis(k) - off, _d1(grid.ny, grid.hy[k], "lap")) for k in range(grid.m)]
    return sum(mats[1:], mats[0]).tocsr()


@functools.lru_cache(maxsize=32)
def y_transport_matrix(grid: Grid, scheme: str = "upwind", time_axis: bool = True) -> sp.csr_matrix:
    """``sum_k x_k d/dy_k``, upwinded by the sign of ``x_k`` (or centred)."""
    shape = grid.shape if time_axis else grid.slice_shape
    off = 0 if time_axis else 1
    x, _, _ = grid.coords()
    xs = x if time_axis else x[0]
    out = sp.csr_matrix((int(np.prod(shape)),) * 2)
    for k in range(grid.m):
        ax = grid.y_axis(k) - off
        xk = xs[..., k].reshape(-1)
        if scheme == "upwind":
            back = _axis_op(shape, ax, _d1(grid.ny, grid.hy[k], "back"))
            fwd = _axis_op(shape, ax, _d1(grid.ny, grid.hy[k], "fwd"))
            out = out + sp.diags(np.maximum(xk, 0.0)) @ back + sp.diags(np.minimum(xk, 0.0)) @ fwd
        elif scheme == "centered":
            cen = _axis_op(shape, ax, _d1(grid.ny, grid.hy[k], "c2"))
            out = out + sp.diags(xk) @ cen
        else:
            raise ValueError(f"unknown transport scheme {scheme!r}")
    return out.tocsr()


@functools.lru_cache(maxsize=32)
def transport_matrix(grid: Grid, scheme: str = "upwind") -> sp.csr_matrix:
    """``d/dt + X . grad_Y`` on the full grid."""
    kind = "back" if scheme == "upwind" else "c2"
    dt = _axis_op(grid.shape, 0, _d1(grid.nt, grid.ht, kind))
    return (dt + y_transport_matrix(grid, scheme, True)).tocsr()


# -- operator front ends ----------------------------------------------------


def _apply(mat, arr, shape):
    return (mat @ arr.reshape(-1)).reshape(shape)


def grad_x(u, edge_order: int = 2) -> VectorField:
    """``grad_X u``; see the module docstring for the two boundary closures."""
    if not isinstance(u, Field):
        raise TypeError("grad_x expects a Field")
    g = u.grid
    mats = grad_matrices(g, edge_order)
    return VectorField(g, np.stack([_apply(d, u.values, g.shape) for d in mats]))


def div_x(w: VectorField) -> Field:
    """``div_X w``; the adjoint of ``-grad_x(., edge_order=1)`` on functions vanishing on the ``X``-boundary."""
    g = w.grid
    mats = grad_matrices(g, 1)
    out = np.zeros(g.shape)
    for k, d in enumerate(mats):
        out += _apply(d, w.values[k], g.shape)
    return Field(g, out)


def transport(u: Field, scheme: str = "upwind") -> Field:
    """``(d/dt + X . grad_Y) u``: backward in ``t``, upwind in ``y`` (first order).

    ``scheme="centered"`` uses second-order centred differences in all of
    ``(Y, t)``; it is only meant for consistency checks on smooth fields.
    """
    g = u.grid
    return Field(g, _apply(transport_matrix(g, scheme), u.values, g.shape))


def laplace_y(u: Field) -> Field:
    g = u.grid
    return Field(g, _apply(laplace_y_matrix(g), u.values, g.shape))


# -- quadrature -------------------------------------------------------------

Region = Union[None, np.ndarray, KCylinder, Callable]


def region_mask(grid: Grid, region: Region) -> np.ndarray:
    """Boolean node mask for ``region``.

    ``region`` may be ``None`` (all nodes), a boolean array, a
    :class:`~kfplab.kolgeom.KCylinder`, or a predicate on
    :class:`~kfplab.kolgeom.KPoint` evaluated node by node.
    """
    if region is None:
        return np.ones(grid.shape, bool)
    if isinstance(region, KCylinder):
        x, y, t = grid.coords()
        return cylinder_mask(region, x, y, t)
    if isinstance(region, np.ndarray):
        if region.shape != grid.shape:
            raise ValueError("region mask has the wrong shape")
        return region.astype(bool)
    if callable(region):
        mask = np.zeros(grid.shape, bool)
        for idx in np.ndindex(*grid.shape):
            mask[idx] = bool(region(grid.node(idx)))
        return mask
    raise TypeError(f"unsupported region {type(region).__name__}")


def integrate(u, region: Region = None) -> float:
    """Trapezoid quadrature of ``u`` over the nodes in ``region``."""
    g = u.grid
    mask = region_mask(g, region)
    if not mask.any():
        raise EmptyRegionError("integration region contains no grid node")
    return float(np.sum(np.where(mask, g.weights() * u.values, 0.0)))


def inner(a, b, grid: Grid, mask: Optional[np.ndarray] = None) -> float:
    """Trapezoid-weighted inner product of two nodal arrays (vector fields summed over components)."""
    a = _values(a)
    b = _values(b)
    w = grid.weights()
    prod = a * b
    if prod.ndim == w.ndim + 1:
        prod = prod.sum(axis=0)
    if mask is not None:
        prod = np.where(mask, prod, 0.0)
    return float(np.sum(w * prod))


# -- dual norm --------------------------------------------------------------


@dataclass(frozen=True)
class _XPoisson:
    grad: tuple  # d/dx_k on the X-grid, SBP closure
    interior: np.ndarray  # flat indices of X-interior nodes
    lu: object
    weights: np.ndarray  # flat X trapezoid weights


@functools.lru_cache(maxsize=16)
def _x_poisson(grid: Grid) -> _XPoisson:
    m = grid.m
    shape = (grid.nx,) * m
    grads = tuple(_axis_op(shape, k, _d1(grid.nx, grid.hx[k], "c1")) for k in range(m))
    lap = sum((d @ d for d in grads[1:]), grads[0] @ grads[0]).tocsr()
    idx = np.indices(shape).reshape(m, -1)
    interior = np.flatnonzero(np.all((idx > 0) & (idx < grid.nx - 1), axis=0))
    sub = lap[interior][:, interior].tocsc()
    return _XPoisson(grads, interior, spla.splu(sub), grid.x_weights().reshape(-1))


def hminus1_riesz(w: np.ndarray, grid: Grid) -> np.ndarray:
    """Riesz representatives ``v`` with ``Delta_X v = w`` at ``X``-interior nodes, ``v = 0`` on the boundary.

    ``w`` has shape ``(..., nx, ..., nx)``; the leading axes are batched.
    """
    ps = _x_poisson(grid)
    m = grid.m
    xshape = (grid.nx,) * m
    w = np.asarray(w, float)
    if w.shape[w.ndim - m :] != xshape:
        raise ValueError("trailing axes of w must be the X-grid")
    lead = w.shape[: w.ndim - m]
    flat = w.reshape(-1, int(np.prod(xshape)))
    v = np.zeros_like(flat)
    rhs = flat[:, ps.interior].T
    sol = ps.lu.solve(np.ascontiguousarray(rhs))
    if not np.all(np.isfinite(sol)):
        raise RuntimeError("discrete X-Poisson solve failed")
    v[:, ps.interior] = sol.T
    return v.reshape(lead + xshape)


def hminus1_norms(w: np.ndarray, grid: Grid) -> np.ndarray:
    """Discrete ``H^{-1}_X`` norms of every ``X``-slice of ``w`` (batched over leading axes)."""
    ps = _x_poisson(grid)
    m = grid.m
    v = hminus1_riesz(w, grid)
    lead = v.shape[: v.ndim - m]
    flat = v.reshape(-1, ps.weights.size)
    sq = np.zeros(flat.shape[0])
    for d in ps.grad:
        gv = (d @ flat.T).T
        sq += gv**2 @ ps.weights
    return np.sqrt(sq).reshape(lead)


def hminus1_norm(w, grid: Grid) -> float:
    """``H^{-1}_X`` norm of one ``X``-slice: the ``L^2`` norm of ``grad_X v`` where ``Delta_X v = w``."""
    w = np.asarray(w, float)
    if w.shape != (grid.nx,) * grid.m:
        raise ValueError("hminus1_norm expects a single X-slice")
    return float(hminus1_norms(w, grid))
