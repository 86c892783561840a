import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frontals import catalog
from frontals.classify import relative_curvatures
from frontals.exprmap import DomainViolation
from frontals.frontal import (
    FrontalSpec,
    InvalidSpec,
    RankDeficientBase,
    base_changed_spec,
    base_from_normal,
    christoffel_decomposition_check,
    evaluate,
    evaluate_grid,
    moved_spec,
    orthonormalize,
    orthonormalized_spec,
    second_form_defect,
    special_form,
    validate,
)
from frontals.grid import GridSpec

coord = st.floats(-0.9, 0.9)


@settings(max_examples=30, deadline=None)
@given(coord, coord)
def test_cuspidal_edge_objects_by_hand(u, v):
    # Omega = (e1, e2 + 3v/2 e3), Lambda = diag(1, 2v); every entry below is hand algebra.
    b = evaluate(catalog.CATALOG["cuspidal_edge"], u, v)
    q = 1 + 2.25 * v * v
    s = np.sqrt(q)
    np.testing.assert_allclose(b.Lambda, [[1, 0], [0, 2 * v]], atol=1e-14)
    np.testing.assert_allclose(b.I_Omega, [[1, 0], [0, q]], atol=1e-14)
    np.testing.assert_allclose(b.n, [0, -1.5 * v / s, 1 / s], atol=1e-14)
    np.testing.assert_allclose(b.II_Omega, [[0, 0], [0, 1.5 / s]], atol=1e-14)
    np.testing.assert_allclose(b.mu, [[0, 0], [0, -1.5 / (s * q)]], atol=1e-14)
    np.testing.assert_allclose(b.Theta1, np.zeros((2, 2)), atol=1e-14)
    np.testing.assert_allclose(b.Theta2, [[0, 0], [0, 2.25 * v / q]], atol=1e-14)
    K, H = relative_curvatures(b)
    assert K == pytest.approx(0.0, abs=1e-14)
    assert H == pytest.approx(0.75 / s**3, rel=1e-12)
    assert b.lambda_det == pytest.approx(2 * v, abs=1e-15)


def test_dx_factorization_and_normal_on_grids():
    for name in catalog.GENUINE:
        spec = catalog.CATALOG[name]
        assert validate(spec) <= 1e-12
        b = evaluate_grid(spec, spec.default_grid(21, 21))
        np.testing.assert_allclose(np.einsum("...ij,...i->...j", b.Dx, b.n), 0.0, atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(b.n, axis=-1), 1.0, atol=1e-14)
        assert second_form_defect(b) <= 1e-12


def test_second_form_against_finite_differences():
    # II_Omega[i][j] = n . d_j w_i, with w_i differentiated numerically.
    spec = catalog.CATALOG["corank2_nonfront"]
    u, v, h = -0.7, 0.4, 1e-5
    b = evaluate(spec, u, v)

    def omega(a, c):
        return evaluate(spec, a, c).Omega

    dwu = (omega(u + h, v) - omega(u - h, v)) / (2 * h)
    dwv = (omega(u, v + h) - omega(u, v - h)) / (2 * h)
    fd = np.array([[b.n @ dwu[:, i], b.n @ dwv[:, i]] for i in range(2)])
    np.testing.assert_allclose(b.II_Omega, fd, atol=1e-8)


def test_christoffel_decomposition_at_regular_points():
    for name in ("swallowtail", "cuspidal_crosscap", "corank2_front"):
        b = evaluate(catalog.CATALOG[name], 0.31, 0.47)
        assert christoffel_decomposition_check(b) <= 1e-10


def test_rank_deficient_base_is_reported():
    bad = FrontalSpec.from_strings("flat_base", ("u", "v", "0"), (("1", "u"), ("0", "0"), ("0", "0")))
    with pytest.raises(RankDeficientBase):
        evaluate(bad, 0.2, 0.3)


def test_wrong_base_is_reported():
    # Omega spans the xz-plane but the surface is the xy-plane.
    bad = FrontalSpec.from_strings("wrong", ("u", "v", "0"), (("1", "0"), ("0", "0"), ("0", "1")))
    with pytest.raises((InvalidSpec, RankDeficientBase)):
        validate(bad)


def test_whitney_origin_is_a_domain_violation():
    with pytest.raises(DomainViolation):
        evaluate(catalog.CATALOG["whitney_crosscap"], 0.0, 0.0)
    b = evaluate_grid(catalog.CATALOG["whitney_crosscap"], GridSpec(-1, 1, 5, -1, 1, 5))
    assert len(b.errors) == 1 and (b.errors[0].u, b.errors[0].v) == (0.0, 0.0)


def test_base_helpers():
    nu = np.array([0.3, -0.2, 0.9])
    nu /= np.linalg.norm(nu)
    W = base_from_normal(nu)
    np.testing.assert_allclose(nu @ W, 0.0, atol=1e-15)
    assert np.linalg.matrix_rank(W) == 2
    om = np.array([[1.0, 1.0], [0.0, 2.0], [1.0, 0.0]])
    on = orthonormalize(om)
    np.testing.assert_allclose(on.T @ on, np.eye(2), atol=1e-14)
    c0, c1 = np.cross(om[:, 0], om[:, 1]), np.cross(on[:, 0], on[:, 1])
    assert c0 @ c1 > 0


def test_base_changes_keep_the_normal():
    spec = catalog.CATALOG["corank2_front"]
    for other in (
        orthonormalized_spec(spec),
        base_changed_spec(spec, (("2 + u^2", "v"), ("0", "1 + v^2"))),
    ):
        assert validate(other) <= 1e-12
        a, b = evaluate(spec, 0.4, -0.3), evaluate(other, 0.4, -0.3)
        np.testing.assert_allclose(a.n, b.n, atol=1e-14)
    on = evaluate(orthonormalized_spec(spec), 0.4, -0.3)
    np.testing.assert_allclose(on.I_Omega, np.eye(2), atol=1e-14)


def test_moved_spec():
    spec = catalog.CATALOG["swallowtail"]
    t = 0.4
    O = np.array([[np.cos(t), -np.sin(t), 0], [np.sin(t), np.cos(t), 0], [0, 0, 1]])
    a = np.array([1.0, 2.0, 3.0])
    m = moved_spec(spec, O, a)
    b0, b1 = evaluate(spec, 0.2, 0.1), evaluate(m, 0.2, 0.1)
    np.testing.assert_allclose(b1.Dx, O @ b0.Dx, atol=1e-14)
    np.testing.assert_allclose(b1.I_Omega, b0.I_Omega, atol=1e-14)
    with pytest.raises(ValueError):
        moved_spec(spec, 2 * np.eye(3), a)


def test_special_form_of_cuspidal_edge():
    sf = special_form(catalog.CATALOG["cuspidal_edge"], GridSpec(-1, 1, 21, -1, 1, 21))
    assert sf.form_index == 1 and sf.pivot_rows == (0, 1)
    np.testing.assert_allclose(sf.g1, 0.0, atol=1e-15)
    assert sf.identity_residual <= 1e-12


def test_special_form_identity_on_catalog():
    for name in catalog.GENUINE:
        sf = special_form(catalog.CATALOG[name], catalog.CATALOG[name].default_grid(21, 21))
        assert sf.identity_residual <= 1e-10
