import numpy as np
import pytest

from frontals import catalog
from frontals.frontal import evaluate, validate

# Tangent moving bases as displayed with each example, written out by hand.
DISPLAYED_OMEGA = {
    "cuspidal_crosscap": lambda u, v: [[1, 0], [0, 1], [v**3, 1.5 * u * v]],
    "corank2_front": lambda u, v: [[2, 0], [0, 2], [3 * u, 3 * v]],
    "corank2_nonfront": lambda u, v: [[np.exp(u), 0], [0, 2], [v**3, 3 * (u * u / 2 + u) * v]],
}
DISPLAYED_LAMBDA = {
    "cuspidal_crosscap": lambda u, v: [[1, 0], [0, 2 * v]],
    "corank2_front": lambda u, v: [[u, 0], [0, v]],
    "corank2_nonfront": lambda u, v: [[1 + u, 0], [0, v]],
}


def test_seven_entries_one_negative_control():
    assert list(catalog.CATALOG) == [
        "plane",
        "cuspidal_edge",
        "swallowtail",
        "cuspidal_crosscap",
        "corank2_front",
        "corank2_nonfront",
        "whitney_crosscap",
    ]
    assert [n for n, s in catalog.CATALOG.items() if s.expect_violation] == ["whitney_crosscap"]
    assert len(catalog.GENUINE) == 6
    with pytest.raises(KeyError, match="known"):
        catalog.get("nope")


@pytest.mark.parametrize("name", sorted(DISPLAYED_OMEGA))
def test_bases_match_the_displayed_decompositions(name):
    spec = catalog.CATALOG[name]
    u0, u1, v0, v1 = spec.domain
    rng = np.random.default_rng(7)
    for u, v in zip(rng.uniform(u0, u1, 10), rng.uniform(v0, v1, 10)):
        b = evaluate(spec, u, v)
        np.testing.assert_allclose(b.Omega, DISPLAYED_OMEGA[name](u, v), atol=1e-14)
        np.testing.assert_allclose(b.Lambda, DISPLAYED_LAMBDA[name](u, v), atol=1e-14)


@pytest.mark.parametrize("name", catalog.GENUINE)
def test_genuine_entries_factor_dx(name):
    assert validate(catalog.CATALOG[name]) <= 1e-12


def test_whitney_lambda_is_a_cholesky_factor_of_the_first_form():
    # I_Omega is the identity there, so Lambda Lambda^T must equal the classical first form.
    b = evaluate(catalog.CATALOG["whitney_crosscap"], 0.3, -0.4)
    np.testing.assert_allclose(b.Lambda @ b.Lambda.T, b.Dx.T @ b.Dx, atol=1e-14)
    assert b.Lambda[0, 1] == 0.0
