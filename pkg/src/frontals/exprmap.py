"""Analytic expressions in u, v: parsing, printing and jet evaluation.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := '-' factor | power
    power  := atom ('^' factor)?
    atom   := number | 'u' | 'v' | ident '(' expr ')' | '(' expr ')'

Expressions evaluate on truncated Taylor jets (see :mod:`frontals.jet`), so every
node of a parameter grid gets exact partial derivatives in one vectorized pass.

A power with a non-integer exponent is evaluated as exp(p log b), so its base
must be positive; a negative base raises DomainViolation rather than guessing
a real branch.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from . import jet as J
from .grid import GridSpec
from .jet import Jet

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "abs")


# Errors -----------------------------------------------------------------------


class ExprError(ValueError):
    """Base class for problems found while parsing an expression."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class ExprSyntaxError(ExprError):
    pass


class UnknownFunction(ExprError):
    pass


class UnknownVariable(ExprError):
    pass


class EvalError(ArithmeticError):
    """Evaluation failed at a specific parameter point."""

    kind = "EvalError"

    def __init__(self, message: str, u: float, v: float):
        super().__init__(f"{self.kind}: {message} at (u, v) = ({u:.17g}, {v:.17g})")
        self.u = u
        self.v = v
        self.detail = message


class DomainViolation(EvalError):
    kind = "DomainViolation"


class DivisionByZero(EvalError):
    kind = "DivisionByZero"


# AST -----------------------------------------------------------------------------


class Expr:
    """Base class of AST nodes; operators build new trees."""

    def __add__(self, other):
        return Add(self, lift(other))

    def __radd__(self, other):
        return Add(lift(other), self)

    def __sub__(self, other):
        return Sub(self, lift(other))

    def __rsub__(self, other):
        return Sub(lift(other), self)

    def __mul__(self, other):
        return Mul(self, lift(other))

    def __rmul__(self, other):
        return Mul(lift(other), self)

    def __truediv__(self, other):
        return Div(self, lift(other))

    def __rtruediv__(self, other):
        return Div(lift(other), self)

    def __pow__(self, other):
        return Pow(self, lift(other))

    def __neg__(self):
        return Neg(self)

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True, eq=True)
class Num(Expr):
    value: float


@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    operand: Expr


@dataclass(frozen=True, eq=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    base: Expr
    exponent: Expr


@dataclass(frozen=True, eq=True)
class Call(Expr):
    func: str
    arg: Expr


U = Var("u")
V = Var("v")


def lift(x) -> Expr:
    """Turn a Python number into a literal (negatives become Neg nodes) or parse a string."""
    if isinstance(x, Expr):
        return x
    if isinstance(x, str):
        return parse(x)
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"non-finite literal {x}")
    return Neg(Num(-x)) if x < 0 else Num(x)


def call(func: str, arg) -> Expr:
    if func not in FUNCTIONS:
        raise ValueError(f"unknown function {func!r}")
    return Call(func, lift(arg))


# Parsing -------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<id>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            rest = text[pos:]
            if rest.strip() == "":
                break
            off = pos + (len(rest) - len(rest.lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[off]!r}", off)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, op: str):
        kind, val, off = self.take()
        if kind != "op" or val != op:
            found = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {op!r}, found {found}", off)

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            rhs = self.factor()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def factor(self) -> Expr:
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return Pow(base, self.factor())
        return base

    def atom(self) -> Expr:
        kind, val, off = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "id":
            if self.peek()[:2] == ("op", "("):
                if val not in FUNCTIONS:
                    raise UnknownFunction(f"unknown function {val!r}", off)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            if val in ("u", "v"):
                return Var(val)
            raise UnknownVariable(f"unknown variable {val!r}", off)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {found}", off)


def parse(text: str) -> Expr:
    """Parse an expression in u, v."""
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    p = _Parser(text)
    node = p.expr()
    kind, val, off = p.peek()
    if kind != "end":
        raise ExprSyntaxError(f"unexpected {val!r}", off)
    return node


# Printing ------------------------------------------------------------------------

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def _fmt_num(x: float) -> str:
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def to_text(e: Expr) -> str:
    """Print with the fewest parentheses that re-parse to the same tree."""
    if isinstance(e, Num):
        if e.value < 0 or not math.isfinite(e.value):
            raise ValueError("literals must be finite and non-negative; use Neg")
        return _fmt_num(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({to_text(e.arg)})"
    if isinstance(e, Neg):
        inner = to_text(e.operand)
        if isinstance(e.operand, (Add, Sub, Mul, Div)):
            inner = f"({inner})"
        return "-" + inner
    if isinstance(e, Pow):
        base = to_text(e.base)
        if not isinstance(e.base, (Num, Var, Call)):
            base = f"({base})"
        exp_ = to_text(e.exponent)
        if isinstance(e.exponent, (Add, Sub, Mul, Div)):
            exp_ = f"({exp_})"
        return f"{base}^{exp_}"
    if isinstance(e, (Add, Sub, Mul, Div)):
        op = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(e)]
        p = _PREC[type(e)]
        left = to_text(e.left)
        if _PREC.get(type(e.left), 5) < p:
            left = f"({left})"
        right = to_text(e.right)
        # Right operands of the same level need parentheses: a-(b-c), a/(b*c).
        if _PREC.get(type(e.right), 5) <= p and not isinstance(e.right, (Neg, Pow)):
            right = f"({right})"
        sep = " " if p == 1 else ""
        return f"{left}{sep}{op}{sep}{right}"
    raise TypeError(f"not an expression node: {e!r}")


# Tree utilities ------------------------------------------------------------------


def substitute(e: Expr, mapping: dict[str, Expr]) -> Expr:
    """Replace the variables u, v by other expressions."""
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, Num):
        return e
    if isinstance(e, Neg):
        return Neg(substitute(e.operand, mapping))
    if isinstance(e, Call):
        return Call(e.func, substitute(e.arg, mapping))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, mapping), substitute(e.exponent, mapping))
    return type(e)(substitute(e.left, mapping), substitute(e.right, mapping))


def constant_value(e: Expr) -> float | None:
    """Value of a variable-free expression, or None."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return None
    if isinstance(e, Neg):
        x = constant_value(e.operand)
        return None if x is None else -x
    if isinstance(e, (Add, Sub, Mul, Div)):
        a, b = constant_value(e.left), constant_value(e.right)
        if a is None or b is None:
            return None
        try:
            return {Add: a + b, Sub: a - b, Mul: a * b}[type(e)] if not isinstance(e, Div) else a / b
        except ZeroDivisionError:
            return None
    if isinstance(e, Pow):
        a, b = constant_value(e.base), constant_value(e.exponent)
        if a is None or b is None:
            return None
        try:
            return float(a**b) if not (a < 0 and not float(b).is_integer()) else None
        except (OverflowError, ZeroDivisionError):
            return None
    return None


# Evaluation ----------------------------------------------------------------------


@dataclass(frozen=True)
class Jet2:
    """Value and partial derivatives up to order two at a single point."""

    value: float
    du: float
    dv: float
    duu: float
    duv: float
    dvv: float

    @classmethod
    def from_jet(cls, j: Jet) -> "Jet2":
        return cls(*(float(x) for x in (j.value, j.du, j.dv, j.duu, j.duv, j.dvv)))


@dataclass(frozen=True)
class NodeError:
    """A per-node evaluation failure collected during grid evaluation."""

    index: tuple[int, ...]
    kind: str
    u: float
    v: float
    message: str


@dataclass
class JetField:
    """Jets over a grid, with failed nodes set to NaN and listed in `errors`."""

    jet: Jet
    errors: list[NodeError] = field(default_factory=list)

    @property
    def values(self) -> np.ndarray:
        return self.jet.value

    @property
    def valid(self) -> np.ndarray:
        ok = np.ones(self.jet.shape, dtype=bool)
        for err in self.errors:
            ok[err.index] = False
        return ok


class _Evaluator:
    def __init__(self, u, v, order: int, collect: bool):
        self.u = np.asarray(u, dtype=float)
        self.v = np.asarray(v, dtype=float)
        self.shape = np.broadcast_shapes(self.u.shape, self.v.shape)
        self.u = np.broadcast_to(self.u, self.shape)
        self.v = np.broadcast_to(self.v, self.shape)
        self.order = order
        self.collect = collect
        self.bad = np.zeros(self.shape, dtype=bool)
        self.errors: list[NodeError] = []

    def fail(self, mask, cls, message):
        mask = np.asarray(mask) & ~self.bad
        if not mask.any():
            return
        if not self.collect:
            idx = tuple(np.argwhere(mask)[0]) if mask.ndim else ()
            raise cls(message, float(self.u[idx]), float(self.v[idx]))
        for idx in np.argwhere(mask):
            idx = tuple(int(k) for k in idx)
            self.errors.append(NodeError(idx, cls.kind, float(self.u[idx]), float(self.v[idx]), message))
        self.bad |= mask

    def run(self, e: Expr) -> Jet:
        with np.errstate(all="ignore"):
            out = self.eval(e)
        out = out.broadcast_to(self.shape)
        if self.bad.any():
            out = Jet(np.where(self.bad[None], np.nan, out.c), out.order)
        return out

    def eval(self, e: Expr) -> Jet:
        k = self.order
        if isinstance(e, Num):
            return Jet.constant(e.value, k, self.shape)
        if isinstance(e, Var):
            return Jet.variable(self.u if e.name == "u" else self.v, 0 if e.name == "u" else 1, k)
        if isinstance(e, Neg):
            return -self.eval(e.operand)
        if isinstance(e, Add):
            return self.eval(e.left) + self.eval(e.right)
        if isinstance(e, Sub):
            return self.eval(e.left) - self.eval(e.right)
        if isinstance(e, Mul):
            return self.eval(e.left) * self.eval(e.right)
        if isinstance(e, Div):
            num, den = self.eval(e.left), self.eval(e.right)
            self.fail(den.value == 0, DivisionByZero, "division by zero")
            return num * J.reciprocal(self._patch(den, 1.0))
        if isinstance(e, Pow):
            return self._pow(e)
        if isinstance(e, Call):
            return self._call(e.func, self.eval(e.arg))
        raise TypeError(f"not an expression node: {e!r}")

    def _patch(self, a: Jet, safe: float) -> Jet:
        # Replace the base value at failed nodes so the remaining arithmetic stays finite.
        if not self.bad.any():
            return a
        c = a.c.copy()
        c[0] = np.where(self.bad, safe, c[0])
        return Jet(c, a.order)

    def _pow(self, e: Pow) -> Jet:
        base = self.eval(e.base)
        p = constant_value(e.exponent)
        if p is not None and float(p).is_integer():
            n = int(p)
            if n < 0:
                self.fail(base.value == 0, DivisionByZero, "zero raised to a negative power")
                base = self._patch(base, 1.0)
            return J.ipow(base, n)
        self.fail(base.value <= 0, DomainViolation, "non-integer power of a non-positive base")
        base = self._patch(base, 1.0)
        if p is not None:
            return J.power(base, p)
        return J.exp(self.eval(e.exponent) * J.log(base))

    def _call(self, name: str, a: Jet) -> Jet:
        if name == "sin":
            return J.sin(a)
        if name == "cos":
            return J.cos(a)
        if name == "tan":
            self.fail(np.cos(a.value) == 0, DomainViolation, "tan at a pole")
            return J.tan(a)
        if name == "exp":
            return J.exp(a)
        if name == "log":
            self.fail(a.value <= 0, DomainViolation, "log of a non-positive number")
            return J.log(self._patch(a, 1.0))
        if name == "sqrt":
            # sqrt(0) has an infinite derivative, so only the value would be exact.
            self.fail(a.value <= 0, DomainViolation, "sqrt of a non-positive number")
            return J.sqrt(self._patch(a, 1.0))
        if name == "abs":
            self.fail(a.value == 0, DomainViolation, "abs is not differentiable at 0")
            return J.absolute(a)
        raise TypeError(f"unknown function {name!r}")


def eval_taylor(e: Expr, u, v, order: int = 2, errors: list | None = None) -> Jet:
    """Evaluate on jets of the given order at one or many points.

    With `errors` left as None the first failing point raises EvalError; otherwise
    failures are appended to `errors` as NodeError records and set to NaN.
    """
    ev = _Evaluator(u, v, order, collect=errors is not None)
    out = ev.run(e)
    if errors is not None:
        errors.extend(ev.errors)
    return out


def eval_jet(e: Expr, u: float, v: float) -> Jet2:
    """Value and partials up to second order at (u, v)."""
    return Jet2.from_jet(eval_taylor(e, float(u), float(v), 2))


def eval_grid(e: Expr, grid: GridSpec, order: int = 2) -> JetField:
    """Evaluate at every node; domain errors are collected per node."""
    U, V = grid.mesh()
    errors: list[NodeError] = []
    j = eval_taylor(e, U, V, order, errors)
    return JetField(j, errors)
