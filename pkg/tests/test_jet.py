import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frontals import jet as J
from frontals.jet import Jet

finite = st.floats(-2.0, 2.0, allow_nan=False)


def uv(u, v, order=3):
    return Jet.variable(u, 0, order), Jet.variable(v, 1, order)


def test_monomials_and_sizes():
    assert J.monomials(2) == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))
    assert [J.ncoef(k) for k in range(5)] == [1, 3, 6, 10, 15]


def test_product_rule_by_hand():
    # f = u^2 v at (2, 3): f_u = 2uv = 12, f_v = u^2 = 4, f_uu = 2v = 6, f_uv = 2u = 4, f_vv = 0
    u, v = uv(2.0, 3.0)
    f = u * u * v
    assert (f.value, f.du, f.dv, f.duu, f.duv, f.dvv) == (12.0, 12.0, 4.0, 6.0, 4.0, 0.0)
    assert f.deriv(2, 1) == 2.0
    with pytest.raises(ValueError):
        f.deriv(3, 1)


def test_from_derivs_round_trip():
    d = {(0, 0): 1.5, (1, 0): -2.0, (0, 2): 7.0, (1, 1): 3.0}
    j = Jet.from_derivs(d, 2)
    for k, val in d.items():
        assert j.deriv(*k) == pytest.approx(val)
    assert j.deriv(2, 0) == 0.0


def test_shift_and_truncate():
    u, v = uv(1.0, 2.0)
    f = J.exp(u) * v**2  # order 3
    fu = f.d_u()
    assert fu.order == 2
    assert fu.value == pytest.approx(math.e * 4.0)
    assert fu.dv == pytest.approx(math.e * 4.0)
    assert f.truncate(1).order == 1
    with pytest.raises(ValueError):
        Jet.constant(1.0, 0).d_u()


def test_mixed_orders_truncate_to_minimum():
    a = Jet.variable(1.0, 0, 3)
    b = Jet.variable(1.0, 1, 1)
    assert (a * b).order == 1


def test_array_valued_coefficients():
    U, V = np.meshgrid(np.linspace(0.1, 1, 4), np.linspace(-1, 1, 3), indexing="ij")
    u, v = uv(U, V, 2)
    f = J.sin(u * v)
    np.testing.assert_allclose(f.du, V * np.cos(U * V))
    np.testing.assert_allclose(f.duv, np.cos(U * V) - U * V * np.sin(U * V))
    assert f[1, 2].value == pytest.approx(np.sin(U[1, 2] * V[1, 2]))


@settings(max_examples=60, deadline=None)
@given(finite, finite)
def test_elementary_functions_match_closed_forms(a, b):
    u, v = uv(a, b, 2)
    r = 1.5 + u * u + v * v  # strictly positive
    s = J.sqrt(r)
    assert s.du == pytest.approx(a / math.sqrt(1.5 + a * a + b * b), abs=1e-12)
    lg = J.log(r)
    assert lg.duv == pytest.approx(-4 * a * b / (1.5 + a * a + b * b) ** 2, abs=1e-12)
    rec = J.reciprocal(r)
    assert (rec * r).value == pytest.approx(1.0)
    assert abs((rec * r).du) < 1e-12 and abs((rec * r).dvv) < 1e-12
    c = J.cos(u)
    assert c.duu == pytest.approx(-math.cos(a), abs=1e-12)
    t = J.tan(0.3 * u)
    assert t.du == pytest.approx(0.3 / math.cos(0.3 * a) ** 2, abs=1e-12)
    p = J.power(r, 1.5)
    assert p.dv == pytest.approx(1.5 * math.sqrt(1.5 + a * a + b * b) * 2 * b, abs=1e-10)
    assert J.ipow(u + 2.0, 3).duu == pytest.approx(6 * (a + 2.0), abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(finite, finite)
def test_jets_agree_with_central_differences(a, b):
    def f(x, y):
        return J.exp(0.5 * x) * J.sin(x * y) + J.sqrt(2.0 + x * x) * y**3

    j = f(*uv(a, b, 2))
    h = 1e-5

    def val(x, y):
        return f(Jet.constant(x, 0), Jet.constant(y, 0)).value

    du = (val(a + h, b) - val(a - h, b)) / (2 * h)
    dv = (val(a, b + h) - val(a, b - h)) / (2 * h)
    assert j.du == pytest.approx(du, rel=1e-6, abs=1e-6)
    assert j.dv == pytest.approx(dv, rel=1e-6, abs=1e-6)


def test_absolute_value_away_from_zero():
    u, _ = uv(-2.0, 0.0, 2)
    a = J.absolute(u)
    assert (a.value, a.du, a.duu) == (2.0, -1.0, 0.0)
