"""Truncated bivariate Taylor jets for forward-mode differentiation in (u, v).

A jet of order k stores the Taylor coefficients c[i, j] = d^(i+j) f / du^i dv^j / (i! j!)
for i + j <= k.  Coefficients are numpy arrays, so one jet can carry a whole grid
of sample points at once.  Differentiating a jet drops its order by one, which is
how the geometry code obtains derivatives of derived fields without finite
differences.
"""

from __future__ import annotations

from functools import lru_cache
from math import factorial

import numpy as np


@lru_cache(maxsize=None)
def monomials(order: int) -> tuple[tuple[int, int], ...]:
    """Exponent pairs (i, j) ordered by total degree, then by decreasing i."""
    return tuple((i, d - i) for d in range(order + 1) for i in range(d, -1, -1))


@lru_cache(maxsize=None)
def _index(order: int) -> dict[tuple[int, int], int]:
    return {m: k for k, m in enumerate(monomials(order))}


@lru_cache(maxsize=None)
def _product_table(order: int) -> tuple[tuple[tuple[int, int], ...], ...]:
    idx = _index(order)
    table = []
    for (i, j) in monomials(order):
        pairs = []
        for a in range(i + 1):
            for b in range(j + 1):
                pairs.append((idx[(a, b)], idx[(i - a, j - b)]))
        table.append(tuple(pairs))
    return tuple(table)


@lru_cache(maxsize=None)
def _shift_table(order: int, axis: int) -> tuple[tuple[int, int, int], ...]:
    """(target, source, factor) triples for d/du (axis 0) or d/dv (axis 1)."""
    src = _index(order)
    out = []
    for t, (i, j) in enumerate(monomials(order - 1)):
        if axis == 0:
            out.append((t, src[(i + 1, j)], i + 1))
        else:
            out.append((t, src[(i, j + 1)], j + 1))
    return tuple(out)


def ncoef(order: int) -> int:
    return (order + 1) * (order + 2) // 2


class Jet:
    """Truncated Taylor polynomial in (u, v) with array-valued coefficients."""

    __slots__ = ("order", "c")
    # Make numpy defer to our reflected operators instead of broadcasting us as an object.
    __array_ufunc__ = None

    def __init__(self, coeffs, order: int):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[0] != ncoef(order):
            raise ValueError(f"order {order} jet needs {ncoef(order)} coefficients, got {coeffs.shape[0]}")
        self.order = order
        self.c = coeffs

    # construction ---------------------------------------------------------

    @classmethod
    def constant(cls, value, order: int, shape=()) -> "Jet":
        value = np.broadcast_to(np.asarray(value, dtype=float), shape)
        c = np.zeros((ncoef(order),) + value.shape)
        c[0] = value
        return cls(c, order)

    @classmethod
    def variable(cls, value, axis: int, order: int) -> "Jet":
        """The coordinate u (axis 0) or v (axis 1) sampled at `value`."""
        value = np.asarray(value, dtype=float)
        c = np.zeros((ncoef(order),) + value.shape)
        c[0] = value
        if order >= 1:
            c[1 + axis] = 1.0
        return cls(c, order)

    @classmethod
    def from_derivs(cls, derivs: dict, order: int, shape=()) -> "Jet":
        """Jet from partial derivatives keyed by (i, j); missing entries are zero."""
        c = np.zeros((ncoef(order),) + tuple(shape))
        idx = _index(order)
        for (i, j), d in derivs.items():
            c[idx[(i, j)]] = np.asarray(d, dtype=float) / (factorial(i) * factorial(j))
        return cls(c, order)

    # accessors ------------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.c.shape[1:]

    def coeff(self, i: int, j: int) -> np.ndarray:
        return self.c[_index(self.order)[(i, j)]]

    def deriv(self, i: int, j: int) -> np.ndarray:
        """Partial derivative d^(i+j) / du^i dv^j at the base point."""
        if i + j > self.order:
            raise ValueError(f"derivative of total order {i + j} exceeds jet order {self.order}")
        return self.coeff(i, j) * (factorial(i) * factorial(j))

    @property
    def value(self) -> np.ndarray:
        return self.c[0]

    @property
    def du(self) -> np.ndarray:
        return self.deriv(1, 0)

    @property
    def dv(self) -> np.ndarray:
        return self.deriv(0, 1)

    @property
    def duu(self) -> np.ndarray:
        return self.deriv(2, 0)

    @property
    def duv(self) -> np.ndarray:
        return self.deriv(1, 1)

    @property
    def dvv(self) -> np.ndarray:
        return self.deriv(0, 2)

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise ValueError("cannot raise the order of a jet")
        if order == self.order:
            return self
        return Jet(self.c[: ncoef(order)], order)

    def d_u(self) -> "Jet":
        return self._shift(0)

    def d_v(self) -> "Jet":
        return self._shift(1)

    def _shift(self, axis: int) -> "Jet":
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        table = _shift_table(self.order, axis)
        c = np.empty((len(table),) + self.shape)
        for t, s, f in table:
            c[t] = f * self.c[s]
        return Jet(c, self.order - 1)

    def __getitem__(self, key) -> "Jet":
        # Index into the sample grid, not the coefficients.
        if not isinstance(key, tuple):
            key = (key,)
        return Jet(self.c[(slice(None),) + key], self.order)

    def __repr__(self) -> str:
        return f"Jet(order={self.order}, value={self.value!r})"

    # arithmetic -----------------------------------------------------------

    def broadcast_to(self, shape) -> "Jet":
        shape = tuple(shape)
        if shape == self.shape:
            return self
        return Jet(np.broadcast_to(self.c, (self.c.shape[0],) + shape), self.order)

    def _coerce(self, other):
        """Return (a, b) as jets of a common order and shape, or None if other is foreign."""
        if isinstance(other, Jet):
            k = min(self.order, other.order)
            shape = np.broadcast_shapes(self.shape, other.shape)
            return self.truncate(k).broadcast_to(shape), other.truncate(k).broadcast_to(shape)
        if isinstance(other, np.ndarray) and other.dtype == object:
            return None
        if isinstance(other, (int, float, np.floating, np.integer, np.ndarray)):
            shape = np.broadcast_shapes(self.shape, np.shape(other))
            return self.broadcast_to(shape), Jet.constant(other, self.order, shape)
        return None

    def _scale(self, s, op):
        s = np.asarray(s, dtype=float)
        shape = np.broadcast_shapes(self.shape, s.shape)
        c = self.broadcast_to(shape).c
        return Jet(op(c, s[None]), self.order)

    def _elementwise(self, other, op):
        # Jet combined with an object array of jets: apply entry by entry.
        out = np.empty(other.shape, dtype=object)
        for k in np.ndindex(other.shape):
            out[k] = op(self, other[k])
        return out

    def __add__(self, other):
        pair = self._coerce(other)
        if pair is None:
            if isinstance(other, np.ndarray):
                return self._elementwise(other, lambda a, b: a + b)
            return NotImplemented
        a, b = pair
        return Jet(a.c + b.c, a.order)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c, self.order)

    def __pos__(self):
        return self

    def __sub__(self, other):
        pair = self._coerce(other)
        if pair is None:
            if isinstance(other, np.ndarray):
                return self._elementwise(other, lambda a, b: a - b)
            return NotImplemented
        a, b = pair
        return Jet(a.c - b.c, a.order)

    def __rsub__(self, other):
        pair = self._coerce(other)
        if pair is None:
            if isinstance(other, np.ndarray):
                return self._elementwise(other, lambda a, b: b - a)
            return NotImplemented
        a, b = pair
        return Jet(b.c - a.c, a.order)

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Jet(self.c * other, self.order)
        if isinstance(other, np.ndarray) and other.dtype != object:
            return self._scale(other, np.multiply)
        if isinstance(other, np.ndarray):
            return self._elementwise(other, lambda a, b: a * b)
        if not isinstance(other, Jet):
            return NotImplemented
        k = min(self.order, other.order)
        a, b = self.c, other.c
        table = _product_table(k)
        shape = np.broadcast_shapes(self.shape, other.shape)
        c = np.empty((len(table),) + shape)
        for r, pairs in enumerate(table):
            acc = a[pairs[0][0]] * b[pairs[0][1]]
            for p, q in pairs[1:]:
                acc = acc + a[p] * b[q]
            c[r] = acc
        return Jet(c, k)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Jet(self.c / other, self.order)
        if isinstance(other, np.ndarray) and other.dtype != object:
            return self._scale(other, np.true_divide)
        if isinstance(other, np.ndarray):
            return self._elementwise(other, lambda a, b: a / b)
        if not isinstance(other, Jet):
            return NotImplemented
        return self * reciprocal(other)

    def __rtruediv__(self, other):
        if isinstance(other, np.ndarray) and other.dtype == object:
            return self._elementwise(other, lambda a, b: b / a)
        return reciprocal(self) * other

    def __pow__(self, n):
        if isinstance(n, (int, np.integer)) or (isinstance(n, float) and float(n).is_integer()):
            return ipow(self, int(n))
        return power(self, float(n))


# Elementary functions by Taylor composition ------------------------------------


def compose(a: Jet, derivs) -> Jet:
    """f(a) given the derivatives f, f', ..., f^(k) evaluated at a's base value."""
    k = a.order
    h = Jet(a.c.copy(), k)
    h.c[0] = 0.0
    out = Jet.constant(derivs[0], k, a.shape)
    hp = h
    for j in range(1, k + 1):
        out = out + hp * (np.asarray(derivs[j]) / factorial(j))
        if j < k:
            hp = hp * h
    return out


def reciprocal(a: Jet) -> Jet:
    x = a.value
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / x
        derivs = [(-1) ** j * factorial(j) * inv ** (j + 1) for j in range(a.order + 1)]
    return compose(a, derivs)


def ipow(a: Jet, n: int) -> Jet:
    if n < 0:
        return reciprocal(ipow(a, -n))
    result = Jet.constant(1.0, a.order, a.shape)
    base = a
    while n:
        if n & 1:
            result = result * base
        n >>= 1
        if n:
            base = base * base
    return result


def power(a: Jet, p: float) -> Jet:
    """a**p for real p; only meaningful where a > 0."""
    x = a.value
    derivs = []
    coef = 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        for j in range(a.order + 1):
            derivs.append(coef * x ** (p - j))
            coef *= p - j
    return compose(a, derivs)


def sqrt(a: Jet) -> Jet:
    return power(a, 0.5)


def exp(a: Jet) -> Jet:
    e = np.exp(a.value)
    return compose(a, [e] * (a.order + 1))


def log(a: Jet) -> Jet:
    x = a.value
    with np.errstate(divide="ignore", invalid="ignore"):
        derivs = [np.log(x)] + [(-1) ** (j - 1) * factorial(j - 1) / x**j for j in range(1, a.order + 1)]
    return compose(a, derivs)


def sin(a: Jet) -> Jet:
    s, c = np.sin(a.value), np.cos(a.value)
    cycle = [s, c, -s, -c]
    return compose(a, [cycle[j % 4] for j in range(a.order + 1)])


def cos(a: Jet) -> Jet:
    s, c = np.sin(a.value), np.cos(a.value)
    cycle = [c, -s, -c, s]
    return compose(a, [cycle[j % 4] for j in range(a.order + 1)])


def tan(a: Jet) -> Jet:
    return sin(a) / cos(a)


def absolute(a: Jet) -> Jet:
    """|a| away from zero; the sign of the base value decides the branch."""
    return a * np.sign(a.value)
