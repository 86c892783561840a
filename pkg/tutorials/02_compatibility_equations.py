"""
Compatibility equations on and off the singular set
===================================================

The frame (w1, w2, n) of a frontal moves by W_u^T = P W^T and W_v^T = Q W^T,
and P_v - Q_u + [P, Q] = 0.  Its nine entries are the relative compatibility
equations c1 .. c9.  They hold everywhere, singular points included; the
classical Gauss and Mainardi-Codazzi equations only make sense where
lambda_Omega != 0.
"""

from frontals import catalog
from frontals.compat import (
    MembershipViolation,
    ResidualContext,
    all_residuals,
    classical_compatibility_residuals,
    ideal_membership_check,
    perturb_second_form,
)

###########################################################################
# All identity suites on a 101 x 101 grid of the cuspidal cross-cap.

spec = catalog.CATALOG["cuspidal_crosscap"]
ctx = ResidualContext.build(spec)
for name, rep in all_residuals(spec, ctx=ctx).items():
    print(f"{name:8s} max |residual| = {rep.max_abs_residual:.1e}")

classical, skipped = classical_compatibility_residuals(ctx=ctx)
print("classical equations:", {r.equation: f"{r.max_abs_residual:.1e}" for r in classical}, f"({skipped} nodes skipped)")

###########################################################################
# The residuals really test something: add u/10 to the last entry of II_Omega
# and the Codazzi-type equation c8 picks up the unbalanced derivative while
# c7 and the Gauss-type equations, which never see that entry's u-derivative,
# stay at rounding level.

broken = perturb_second_form(ctx, (("0", "0"), ("0", "u/10")))
reports = all_residuals(None, ctx=broken)
print("perturbed:", {k: f"{reports[k].max_abs_residual:.3g}" for k in ("c7", "c8", "gaussT", "propE_u")})

###########################################################################
# The fields tau_i = N_i / lambda_Omega must extend smoothly across the
# singular set.  For a genuine frontal the check passes; the Whitney umbrella,
# whose Lambda is a Cholesky factor of I with I_Omega = identity, fails it:
# tau stops converging under refinement next to the origin.

print(ideal_membership_check(spec).cauchy_diffs)
try:
    ideal_membership_check(catalog.CATALOG["whitney_crosscap"])
except MembershipViolation as exc:
    print("Whitney umbrella:", exc, "witness", exc.witness)
