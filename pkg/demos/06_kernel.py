"""
The model fundamental solution
==============================

The kernel of ``d/dt + X d/dY - d^2/dX^2`` is Gaussian in ``(X, Y)`` with
covariance ``[[2t, t^2], [t^2, 2t^3/3]]``.  On the grid its discrete
residual falls at second order, it stays positive, and it carries unit
mass on a box wide enough to hold it.
"""

import numpy as np

from kfplab.mesh import BoxDomain, build_grid
from kfplab.verify import kernel_mass, kolmogorov_kernel, model_kernel_residual

dom = BoxDomain(((-1.0, 1.0),), ((-1.0, 1.0),), (0.5, 1.0))
prev = None
for n in (17, 33, 65, 129):
    r = model_kernel_residual(build_grid(dom, n, n, n))
    print(f"n = {n:3d}: residual {r:.4e}" + ("" if prev is None else f", order {np.log2(prev / r):.2f}"))
    prev = r

g = build_grid(dom, 65, 65, 9)
print("smallest kernel value on the grid:", float(kolmogorov_kernel(*g.coords()).min()))
wide = BoxDomain(((-8.0, 8.0),), ((-4.0, 4.0),), (0.5, 1.0))
print("mass per time level on the wide box:", kernel_mass(build_grid(wide, 161, 161, 3)))
print("mass on [-1, 1]^2 (truncated):", kernel_mass(build_grid(dom, 65, 65, 3)))
