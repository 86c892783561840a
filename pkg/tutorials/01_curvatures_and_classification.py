"""
Relative curvatures and the front test
======================================

A frontal is given by a parametrization x(u, v) and a tangent moving base
Omega, a 3x2 field whose columns span planes containing x_u and x_v.  Then
Dx = Omega Lambda^T and lambda_Omega = det Lambda vanishes exactly on the
singular set.  The relative curvatures K_Omega and H_Omega stay smooth there,
and a singular point belongs to a front exactly when (K_Omega, H_Omega) != 0.
"""

from frontals import catalog, classify_grid, evaluate, parse_spec
from frontals.classify import classical_curvatures, limit_identity_check, relative_curvatures

###########################################################################
# A frontal can be written as a small text file.  This is the corank-2 front
# (u^2, v^2, u^3 + v^3) with Omega = (2, 0; 0, 2; 3u, 3v) and Lambda = diag(u, v).

SPEC = """
name = corank2_front
description = rank-0 front at the origin; Lambda = diag(u, v)
x.1 = u^2
x.2 = v^2
x.3 = v^3 + u^3
omega.11 = 2
omega.12 = 0
omega.21 = 0
omega.22 = 2
omega.31 = 3*u
omega.32 = 3*v
"""
spec = parse_spec(SPEC)
assert spec == catalog.CATALOG["corank2_front"]

###########################################################################
# Every object is computed from exact Taylor jets, so K_Omega reproduces the
# closed form 144 / (36u^2 + 36v^2 + 16)^2 to rounding, even at the rank-0 point.

for u, v in [(0.0, 0.0), (0.3, -0.2), (-0.7, 0.9)]:
    b = evaluate(spec, u, v)
    K, H = relative_curvatures(b)
    exact = 144.0 / (36 * u**2 + 36 * v**2 + 16) ** 2
    print(f"({u:+.1f}, {v:+.1f})  lambda={b.lambda_det:+.3f}  K_Omega={K:.12f}  closed form={exact:.12f}  H_Omega={H:+.4f}")

###########################################################################
# Away from the singular set lambda_Omega K equals K_Omega, where K is the
# classical Gauss curvature.  Approaching the origin along circles, the gap
# shrinks with the radius.

b = evaluate(spec, 0.4, 0.5)
Kc, _ = classical_curvatures(b)
print("lambda K - K_Omega at (0.4, 0.5):", float(b.lambda_det * Kc - relative_curvatures(b)[0]))
rep = limit_identity_check(spec, (0.0, 0.0))
for r, e in zip(rep.radii, rep.K_errors):
    print(f"  radius {r:7.3f}: max |lambda K - K_Omega(0, 0)| = {e:.2e}")

###########################################################################
# Grid classification.  Each catalog entry gets a verdict histogram.  The
# cuspidal cross-cap fails the front test at its cross-cap point, and the
# corank-2 non-front fails it at (-1, 0), where K_Omega and H_Omega vanish.

for name in catalog.GENUINE:
    g = classify_grid(catalog.CATALOG[name])
    counts = {k: v for k, v in g.counts().items() if v}
    print(f"{name:18s} {counts}")

nonfront = classify_grid(catalog.CATALOG["corank2_nonfront"])
print("verdict at (-1, 0):", nonfront.at(-1.0, 0.0))
print("nodes where the two front tests disagree:", [nonfront.grid.point(i) for i, _, _ in nonfront.inconsistent])
