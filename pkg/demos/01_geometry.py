"""
Kolmogorov geometry
===================

Points ``(X, Y, t)`` compose by a Galilean group law and scale by
``(rX, r^3 Y, r^2 t)``.  This script walks through both and checks that a
cylinder around ``z`` is the translate of the one around the origin.
"""

import numpy as np

from kfplab.kolgeom import KCylinder, KPoint, compose, cylinder_contains, dilate, hom_norm, inverse, origin

a = KPoint([1.0], [0.0], 0.0)
b = KPoint([0.0], [0.0], 2.0)
print("a o b        =", compose(a, b).as_tuple())  # the X of a drifts Y by t X
print("b o a        =", compose(b, a).as_tuple())  # the group is not abelian
print("a^-1 o a     =", compose(inverse(a), a).as_tuple())

p = KPoint([1.0], [1.0], 1.0)
for r in (0.5, 1.0, 2.0):
    q = dilate(r, p)
    print(f"r = {r}: dilated {q.as_tuple()}, norm {hom_norm(q):.4f} = r * {hom_norm(p):.4f}")

# Translating a cylinder: membership of z o q in Q_r(z) matches membership of q in Q_r
rng = np.random.default_rng(0)
z = KPoint([0.7], [-0.3], 1.5)
hits = agree = 0
for _ in range(2000):
    q = KPoint(rng.uniform(-1, 1, 1), rng.uniform(-1, 1, 1), rng.uniform(-1, 0.2))
    inside = cylinder_contains(KCylinder(origin(1), 0.8), q)
    hits += inside
    agree += inside == cylinder_contains(KCylinder(z, 0.8), compose(z, q))
print(f"{hits} of 2000 samples inside Q_0.8; translation agrees on {agree}")
print("volume of Q_0.5:", KCylinder(origin(1), 0.5).volume())
