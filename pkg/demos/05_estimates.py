"""
Regularity estimates on solution families
=========================================

Energy, local boundedness, Harnack and Hoelder functionals are evaluated
on reproducible families.  Their constants are unknown, so the interesting
part is whether the ratios stay bounded and stable as the grid is refined.
"""

import numpy as np

from kfplab import suites, verify
from kfplab.kolgeom import hom_norm_arrays, origin
from kfplab.mesh import build_grid

fam = suites.estimate_family(6)
coarse, fine = (suites.solve_family(fam, shape) for shape in ((21, 21, 13), (41, 41, 25)))
print("problem  symbol        energy (coarse -> fine)   boundedness")
for i, ((p, g0, v0), (_, g1, v1)) in enumerate(zip(coarse, fine)):
    e0 = verify.energy_ratio(np.maximum(v0, 0), g0, lam=p.symbol.lam).ratio
    e1 = verify.energy_ratio(np.maximum(v1, 0), g1, lam=p.symbol.lam).ratio
    b1 = verify.local_boundedness(np.maximum(v1, 0), g1).ratio
    print(f"{i:7d}  {p.symbol.name:12s}  {e0:.4f} -> {e1:.4f}          {b1:.4f}")

print("\nHarnack quotients (33 x 17 x 161 and 65 x 33 x 321)")
hfam = suites.harnack_family(3)
for shape in ((33, 17, 161), (65, 33, 321)):
    reps = [verify.harnack_quotient(v, g) for _, g, v in suites.solve_family(hfam, shape)]
    print("  ", ", ".join(f"{r.ratio:.4f}" for r in reps), "flags:", reps[0].flags)

print("\nHoelder fit on a synthetic field |z|^0.4 with pairs anchored at the origin")
g = build_grid(suites.VERIFY_DOMAIN, 81, 81, 49)
u = hom_norm_arrays(*g.coords()) ** 0.4
alpha, semi = verify.holder_estimate(u, g, verify.sample_pairs(g, 5000, anchor=origin(1)))
print(f"  alpha {alpha:.4f}, seminorm {semi:.4f}")
