"""
Flux symbols and their structure classes
========================================

Each flux ``A(xi, X, Y, t)`` is screened against the M-class bounds
(linear growth, coercivity, homogeneity) and, where declared, the
R-class Lipschitz and monotonicity bounds.  Two deliberate violators show
what a rejection looks like.
"""

import numpy as np

from kfplab.symbol import (
    check_m_class,
    check_r_class,
    checkerboard_symbol,
    direction_modulated_symbol,
    identity_symbol,
    m_class_samples,
    make_tilde_a,
    midpoint_quotients,
    r_class_samples,
    scaled_symbol,
    spd_symbol,
    superlinear_symbol,
)

symbols = [identity_symbol(2), spd_symbol(np.diag([0.5, 3.0])), checkerboard_symbol(2),
           direction_modulated_symbol(2), scaled_symbol(1, 2.0, lam=1.0), superlinear_symbol(1)]
print(f"{'symbol':22s} {'class':5s} {'lambda':>6s} {'upper':>8s} {'lower':>8s}  verdict")
for s in symbols:
    reports = [check_m_class(s, m_class_samples(s.m, 20_000))]
    if s.declared_class == "R":
        reports.append(check_r_class(s, r_class_samples(s.m, 20_000)))
    for r in reports:
        verdict = "pass" if r.passed else "fails " + ",".join(r.failing)
        print(f"{s.name:22s} {r.class_tested:5s} {s.lam:6.2f} {r.worst_upper:8.4f} {r.worst_lower:8.4f}  {verdict}")

# The direction-modulated flux has no closed-form constants; the sampled
# Lipschitz quotient sits just under its recorded lambda.
print()
for s in (identity_symbol(2), spd_symbol(np.diag([0.5, 3.0]))):
    ta = make_tilde_a(s)
    lo, hi = midpoint_quotients(ta, 20_000)
    print(f"{s.name}: midpoint quotients in [{lo:.4f}, {hi:.4f}], "
          f"bracket [1/(8 Gamma), Gamma/8] = [{1 / (8 * ta.gamma):.4f}, {ta.gamma / 8:.4f}]")
