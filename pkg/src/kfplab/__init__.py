"""Kolmogorov-Fokker-Planck numerical laboratory.

Solvers and verification tools for ``(d/dt + X . grad_Y) u = div_X A(grad_X u, X, Y, t)``
with rough, nonlinear fluxes ``A``:

- :mod:`kfplab.kolgeom`: Galilean group law, dilations, homogeneous norm, cylinders.
- :mod:`kfplab.symbol`: flux catalog, structural class checks, Fenchel representatives.
- :mod:`kfplab.mesh`: box grids, summation-by-parts operators, boundary tags, dual norms.
- :mod:`kfplab.viscous`: vanishing-viscosity time marching with Picard iteration.
- :mod:`kfplab.variational`: constrained convex minimisation with a duality-gap certificate.
- :mod:`kfplab.verify`: energy, integrability, Harnack, Hoelder and comparison checks.
- :mod:`kfplab.cli`: the ``kfp-lab`` command.
"""

from .kolgeom import KCylinder, KPoint, compose, dilate, hom_norm, inverse, quasi_distance
from .mesh import BoxDomain, Field, Grid, VectorField, build_grid, classify_boundary
from .symbol import Symbol, by_name, check_m_class, check_r_class, make_tilde_a
from .variational import FluxPair, GapReport, certificate, minimize
from .viscous import DirichletProblem, SolveReport, SolverOptions, continuation, march

__all__ = [
    "KPoint",
    "KCylinder",
    "compose",
    "inverse",
    "dilate",
    "hom_norm",
    "quasi_distance",
    "BoxDomain",
    "Grid",
    "Field",
    "VectorField",
    "build_grid",
    "classify_boundary",
    "Symbol",
    "by_name",
    "check_m_class",
    "check_r_class",
    "make_tilde_a",
    "DirichletProblem",
    "SolverOptions",
    "SolveReport",
    "march",
    "continuation",
    "FluxPair",
    "GapReport",
    "minimize",
    "certificate",
]
