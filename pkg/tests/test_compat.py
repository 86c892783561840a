import numpy as np
import pytest

from frontals import catalog
from frontals import linalg as la
from frontals.compat import (
    RCE_MATRIX_ENTRY,
    MembershipViolation,
    ResidualContext,
    all_residuals,
    classical_compatibility_residuals,
    compact_residuals,
    gauss_omega_residual,
    ideal_membership_check,
    perturb_second_form,
    rce_matrix_consistency,
    rce_residuals,
)
from frontals.grid import GridSpec

SMALL = GridSpec(-1, 1, 21, -1, 1, 21)


def _ctx(name, grid=None):
    spec = catalog.CATALOG[name]
    return ResidualContext.build(spec, grid or spec.default_grid(31, 31))


@pytest.mark.parametrize("name", catalog.GENUINE)
def test_every_identity_holds(name):
    reports = all_residuals(catalog.CATALOG[name], ctx=_ctx(name))
    assert len(reports) == 22  # c1-c9, cs1-cs3, gaussT, cc1-cc6, propE_u, propE_v, wo
    bad = {k: r.max_abs_residual for k, r in reports.items() if not r.passed(1e-9)}
    assert not bad


@pytest.mark.parametrize("name", catalog.GENUINE)
def test_entrywise_equations_are_the_frobenius_matrix(name):
    assert rce_matrix_consistency(ctx=_ctx(name)) <= 1e-12


def test_equation_to_entry_map_is_a_bijection():
    entries = [e for e, _ in RCE_MATRIX_ENTRY.values()]
    assert sorted(entries) == [(i, j) for i in range(3) for j in range(3)]


def test_report_fields():
    r = rce_residuals(ctx=_ctx("swallowtail"))[0]
    assert r.equation == "c1"
    assert len(r.samples) <= 5
    assert r.passed(1e-9) and not r.passed(-1.0)


def test_flat_metric_with_constant_second_form_breaks_gauss():
    # Plane data with II_Omega = I/2: K_Omega = det mu = 1/4 while the flat metric needs 0.
    ctx = perturb_second_form(ResidualContext.build(catalog.CATALOG["plane"], SMALL), (("0.5", "0"), ("0", "0.5")))
    assert gauss_omega_residual(ctx=ctx).max_abs_residual == pytest.approx(0.25)
    reports = all_residuals(None, ctx=ctx)
    assert reports["c7"].max_abs_residual == pytest.approx(0.0, abs=1e-15)
    assert reports["propE_u"].max_abs_residual == pytest.approx(0.0, abs=1e-15)


def test_linear_second_form_breaks_codazzi():
    # II_Omega = [[0, 0], [0, u]] on the plane: only d_u II_22 = 1 is unbalanced.
    ctx = perturb_second_form(ResidualContext.build(catalog.CATALOG["plane"], SMALL), (("0", "0"), ("0", "u")))
    reports = all_residuals(None, ctx=ctx)
    assert max(reports["c7"].max_abs_residual, reports["c8"].max_abs_residual) == pytest.approx(1.0)
    assert reports["cc5"].max_abs_residual == pytest.approx(1.0)


def test_compact_codazzi_needs_the_transposed_derivative():
    # II_Omega of the cross-cap is not symmetric; the untransposed variant does not vanish.
    ctx = _ctx("cuspidal_crosscap")
    f = ctx.fields
    IIT = la.transpose(f.II)
    untransposed = (IIT @ la.transpose(f.T1) - f.II_u)[..., 1, :] - (IIT @ la.transpose(f.T2) - f.II_v)[..., 0, :]
    assert np.abs(untransposed).max() > 1.0
    cc5 = next(r for r in compact_residuals(ctx=ctx) if r.equation == "cc5")
    assert cc5.max_abs_residual <= 1e-12


def test_classical_equations_skip_singular_nodes():
    reports, skipped = classical_compatibility_residuals(ctx=_ctx("cuspidal_edge"))
    assert skipped == 31  # the row v = 0 of a 31 x 31 grid
    assert all(r.max_abs_residual <= 1e-9 for r in reports)


@pytest.mark.parametrize("name", catalog.GENUINE)
def test_genuine_frontals_pass_the_membership_proxy(name):
    rep = ideal_membership_check(catalog.CATALOG[name])
    assert rep.ok and rep.max_N_singular <= 1e-8
    assert rep.theta_mismatch is None or rep.theta_mismatch <= 1e-7


def test_whitney_umbrella_violates_membership():
    spec = catalog.CATALOG["whitney_crosscap"]
    rep = ideal_membership_check(spec, raise_on_violation=False)
    assert not rep.ok and rep.witness is not None
    assert rep.cauchy_diffs[-1] > 0.5 * rep.cauchy_diffs[-2]
    with pytest.raises(MembershipViolation):
        ideal_membership_check(spec)


def test_membership_needs_two_levels():
    with pytest.raises(ValueError):
        ideal_membership_check(catalog.CATALOG["plane"], refinement_levels=1)
