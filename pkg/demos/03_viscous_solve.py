"""
Vanishing-viscosity solves
==========================

The viscous scheme adds ``eps * Laplace_Y`` and marches backward-Euler slices
in time.  A manufactured solution gives a convergence table, and an
``eps`` ladder shows the drift between consecutive solutions shrinking.
"""

import numpy as np

from kfplab.catalog import make_data
from kfplab.mesh import BoxDomain, build_grid
from kfplab.symbol import identity_symbol
from kfplab.viscous import DirichletProblem, continuation, march, residual

dom = BoxDomain.cube(1, (-1.0, 1.0), (-1.0, 1.0), (0.0, 1.0))
exact = make_data("manufactured", 1)

print("manufactured solution, eps = hY^2")
prev = None
for nx, nt in ((17, 9), (33, 17), (65, 33)):
    g = build_grid(dom, nx, nx, nt)
    eps = max(g.hy) ** 2
    p = DirichletProblem(dom, identity_symbol(1), exact, make_data("manufactured_source", 1, eps=eps), eps)
    rep = march(p, g)
    x, y, t = g.coords()
    err = float(np.sqrt(np.sum(g.weights() * (rep.field.values - exact(x, y, t)) ** 2)))
    order = "" if prev is None else f"order {np.log2(prev / err):.2f}"
    print(f"  {nx:3d}^2 x {nt:<3d} L2 error {err:.3e} {order}")
    prev = err

print("\ncontinuation in eps on 33^2 x 17")
g = build_grid(dom, 33, 33, 17)
p = DirichletProblem(dom, identity_symbol(1), make_data("affine", 1, c0=0.5, cx=0.25, cy=0.25), -1.0)
for rep in continuation(p, g, [1e-1, 1e-2, 1e-3, 1e-4]):
    sup, _ = residual(p, g, rep.field, rep.eps_used)
    drift = "" if rep.drift is None else f"drift {rep.drift:.3e}"
    print(f"  eps {rep.eps_used:.0e}: iterations {sum(rep.iterations):3d}, residual {sup:.1e} {drift}")
