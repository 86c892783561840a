"""Frontals given by a parametrization x and a tangent moving base Omega.

The decomposition Dx = Omega Lambda^T is the organizing fact: once a smooth base
Omega = (w1 w2) of the tangent planes is known, every classical object splits
into an Omega-relative part that stays smooth across the singular set and the
factor Lambda, whose determinant lambda_Omega vanishes exactly there.

All pointwise objects are built by :func:`field_jets`, which pushes truncated
Taylor jets through the defining formulas.  Derivatives of derived quantities
(mu, Theta, II_Omega, Christoffel symbols) therefore come out exact to rounding
instead of from finite differences.

The unit normal is n = w1 x w2 / |w1 x w2|, so it is fixed by the order and
orientation of the columns of Omega.  Signed outputs are relative to the
supplied Omega: negating w2 negates lambda_Omega, K_Omega and the first row of
II_Omega, while H_Omega is unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import jet as J
from . import linalg as la
from .exprmap import Expr, NodeError, U, V, call, eval_taylor, lift, parse, substitute
from .grid import GridSpec

DEFAULT_TOL_SING = 1e-8


class RankDeficientBase(ValueError):
    """The moving base Omega has rank below 2 somewhere (det I_Omega <= 0)."""


class DegenerateNormal(ValueError):
    pass


class SingularPoint(ValueError):
    pass


class NoGlobalForm(ValueError):
    """No reduced base pattern has an invertible pivot minor on the whole grid."""


class InvalidSpec(ValueError):
    pass


@dataclass(frozen=True)
class FrontalSpec:
    """A frontal x: U -> R^3 with a tangent moving base Omega (3x2, columns w1, w2).

    `lam` optionally supplies Lambda directly.  That is only used for negative
    controls such as the Whitney umbrella, which admits no tangent base; those
    specs carry `expect_violation=True`.
    """

    name: str
    x: tuple[Expr, Expr, Expr]
    omega: tuple[tuple[Expr, Expr], tuple[Expr, Expr], tuple[Expr, Expr]]
    domain: tuple[float, float, float, float] = (-1.0, 1.0, -1.0, 1.0)
    lam: tuple[tuple[Expr, Expr], tuple[Expr, Expr]] | None = None
    expect_violation: bool = False
    grid_shape: tuple[int, int] | None = None
    description: str = ""

    @classmethod
    def from_strings(cls, name, x, omega, domain=(-1.0, 1.0, -1.0, 1.0), lam=None, **kw) -> "FrontalSpec":
        xs = tuple(lift(e) for e in x)
        om = tuple(tuple(lift(e) for e in row) for row in omega)
        lm = None if lam is None else tuple(tuple(lift(e) for e in row) for row in lam)
        return cls(name, xs, om, tuple(float(d) for d in domain), lm, **kw)

    def default_grid(self, nu: int | None = None, nv: int | None = None) -> GridSpec:
        gu, gv = self.grid_shape or (101, 101)
        u0, u1, v0, v1 = self.domain
        return GridSpec(u0, u1, nu or gu, v0, v1, nv or gv)

    def with_omega(self, omega, name: str | None = None) -> "FrontalSpec":
        om = tuple(tuple(lift(e) for e in row) for row in omega)
        return replace(self, omega=om, name=name or self.name)


# Jet pipeline ---------------------------------------------------------------------


def _obj(rows) -> np.ndarray:
    return la.matrix(rows)


def _map(m: np.ndarray, f) -> np.ndarray:
    out = np.empty(m.shape, dtype=object)
    for k in np.ndindex(m.shape):
        out[k] = f(m[k])
    return out


def d_u(m: np.ndarray) -> np.ndarray:
    """Entrywise u-derivative of an object array of jets."""
    return _map(m, lambda j: j.d_u())


def d_v(m: np.ndarray) -> np.ndarray:
    return _map(m, lambda j: j.d_v())


def values(m: np.ndarray) -> np.ndarray:
    """Numeric array (..., r, c) from an object array of jets with shape (r, c)."""
    first = m.flat[0]
    out = np.empty(first.shape + m.shape)
    for k in np.ndindex(m.shape):
        out[(...,) + k] = m[k].value
    return out


@dataclass
class FrontalJets:
    """Jet-valued objects of a frontal over a set of sample points.

    Matrices are object arrays of jets; each jet carries the sample shape.
    With x_order = 3: Dx, Omega, n, I, I_Omega, Lambda are order-2 jets and
    II_Omega, mu, Theta, II are order-1 jets.
    """

    u: np.ndarray
    v: np.ndarray
    Dx: np.ndarray
    Omega: np.ndarray
    Omega_u: np.ndarray
    Omega_v: np.ndarray
    n: np.ndarray
    I: np.ndarray
    I_Omega: np.ndarray
    Lambda: np.ndarray
    II_Omega: np.ndarray
    mu: np.ndarray
    Theta1: np.ndarray
    Theta2: np.ndarray
    II: np.ndarray
    errors: list[NodeError] = field(default_factory=list)

    @property
    def shape(self):
        return self.u.shape

    @property
    def valid(self) -> np.ndarray:
        ok = np.ones(self.shape, dtype=bool)
        for e in self.errors:
            ok[e.index] = False
        return ok

    @property
    def lambda_det(self):
        return la.det2(self.Lambda)

    @property
    def Dn(self) -> np.ndarray:
        return _obj([[self.n[i].d_u(), self.n[i].d_v()] for i in range(3)])

    def christoffel(self):
        """Gamma1, Gamma2 from the first fundamental form (undefined where det I = 0)."""
        I = self.I
        E, F, G = I[0, 0], I[0, 1], I[1, 1]
        with np.errstate(all="ignore"):
            Iinv = la.inv2(I)
            g1 = _obj([[0.5 * E.d_u(), F.d_u() - 0.5 * E.d_v()], [0.5 * E.d_v(), 0.5 * G.d_u()]]) @ Iinv
            g2 = _obj([[0.5 * E.d_v(), 0.5 * G.d_u()], [F.d_v() - 0.5 * G.d_u(), 0.5 * G.d_v()]]) @ Iinv
        return g1, g2


def field_jets(
    spec: FrontalSpec, u, v, x_order: int = 3, errors: list | None = None, omega_order: int | None = None
) -> FrontalJets:
    """Run the full formula pipeline on jets at the points (u, v).

    With x_order=3 every derivative used by the residual suites is available,
    including the second derivatives of I needed by the classical Gauss equation.
    Omega (and a supplied Lambda) use `omega_order`, by default x_order - 1.
    """
    if omega_order is None:
        omega_order = x_order - 1
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    X = [eval_taylor(e, u, v, x_order, errors) for e in spec.x]
    Om = _obj([[eval_taylor(e, u, v, omega_order, errors) for e in row] for row in spec.omega])

    Dx = _obj([[X[i].d_u(), X[i].d_v()] for i in range(3)])
    Om_u, Om_v = d_u(Om), d_v(Om)
    w1, w2 = Om[:, 0], Om[:, 1]
    c = la.cross(w1, w2)
    with np.errstate(all="ignore"):
        norm = J.sqrt(la.dot(c, c))
        n = la._assemble_vec([c[i] / norm for i in range(3)])

    OmT = la.transpose(Om)
    I_Om = OmT @ Om
    with np.errstate(all="ignore"):
        I_Om_inv = la.inv2(I_Om)
    if spec.lam is None:
        Lam = la.transpose(Dx) @ Om @ I_Om_inv
    else:
        Lam = _obj([[eval_taylor(e, u, v, omega_order, errors) for e in row] for row in spec.lam])

    # II_Omega from n . w_{i,u}; rows index w_i, columns the differentiation variable.
    II_Om = _obj(
        [
            [la.dot(n, Om_u[:, 0]), la.dot(n, Om_v[:, 0])],
            [la.dot(n, Om_u[:, 1]), la.dot(n, Om_v[:, 1])],
        ]
    )
    mu = -(la.transpose(II_Om) @ I_Om_inv)
    Theta1 = la.transpose(Om_u) @ Om @ I_Om_inv
    Theta2 = la.transpose(Om_v) @ Om @ I_Om_inv

    I = la.transpose(Dx) @ Dx
    x_uu = la._assemble_vec([Dx[i, 0].d_u() for i in range(3)])
    x_uv = la._assemble_vec([Dx[i, 0].d_v() for i in range(3)])
    x_vv = la._assemble_vec([Dx[i, 1].d_v() for i in range(3)])
    f_ = la.dot(n, x_uv)
    II = _obj([[la.dot(n, x_uu), f_], [f_, la.dot(n, x_vv)]])
    return FrontalJets(u, v, Dx, Om, Om_u, Om_v, n, I, I_Om, Lam, II_Om, mu, Theta1, Theta2, II, errors if errors is not None else [])


# Pointwise bundle ------------------------------------------------------------------


@dataclass
class FormBundle:
    """Every pointwise object at one point, or over a grid when arrays carry leading axes."""

    point: tuple
    Dx: np.ndarray
    Omega: np.ndarray
    Lambda: np.ndarray
    lambda_det: np.ndarray
    n: np.ndarray
    Dn: np.ndarray
    I: np.ndarray
    II: np.ndarray
    I_Omega: np.ndarray
    II_Omega: np.ndarray
    mu: np.ndarray
    Theta1: np.ndarray
    Theta2: np.ndarray
    Lambda_u: np.ndarray
    Lambda_v: np.ndarray
    Gamma1: np.ndarray | None = None
    Gamma2: np.ndarray | None = None
    errors: list[NodeError] = field(default_factory=list)


def bundle_from_jets(fj: FrontalJets, tol_sing: float = DEFAULT_TOL_SING, gamma: bool = True) -> FormBundle:
    lam = values(fj.Lambda)
    ldet = la.det2(lam)
    n = np.stack([fj.n[i].value for i in range(3)], axis=-1)
    G1 = G2 = None
    if gamma:
        g1, g2 = fj.christoffel()
        G1, G2 = values(g1), values(g2)
        if G1.ndim == 2:
            if not abs(ldet) > tol_sing:
                G1 = G2 = None
        else:
            mask = ~(np.abs(ldet) > tol_sing * max(1.0, float(np.nanmax(np.abs(ldet)))))
            G1[mask] = np.nan
            G2[mask] = np.nan
    return FormBundle(
        point=(fj.u, fj.v) if fj.u.ndim else (float(fj.u), float(fj.v)),
        Dx=values(fj.Dx),
        Omega=values(fj.Omega),
        Lambda=lam,
        lambda_det=ldet,
        n=n,
        Dn=values(fj.Dn),
        I=values(fj.I),
        II=values(fj.II),
        I_Omega=values(fj.I_Omega),
        II_Omega=values(fj.II_Omega),
        mu=values(fj.mu),
        Theta1=values(fj.Theta1),
        Theta2=values(fj.Theta2),
        Lambda_u=values(d_u(fj.Lambda)),
        Lambda_v=values(d_v(fj.Lambda)),
        Gamma1=G1,
        Gamma2=G2,
        errors=fj.errors,
    )


def evaluate(spec: FrontalSpec, u: float, v: float, tol_sing: float = DEFAULT_TOL_SING) -> FormBundle:
    """All pointwise objects at (u, v); EvalError propagates from the expressions."""
    fj = field_jets(spec, float(u), float(v))
    b = bundle_from_jets(fj, tol_sing)
    if not la.det2(b.I_Omega) > 0:
        raise RankDeficientBase(f"det I_Omega = {la.det2(b.I_Omega):.3g} at ({u}, {v})")
    return b


def evaluate_grid(spec: FrontalSpec, grid: GridSpec, tol_sing: float = DEFAULT_TOL_SING) -> FormBundle:
    """FormBundle with (nu, nv) leading axes; failed nodes are NaN and listed in `errors`."""
    Ug, Vg = grid.mesh()
    fj = field_jets(spec, Ug, Vg, errors=[])
    return bundle_from_jets(fj, tol_sing)


def grid_jets(spec: FrontalSpec, grid: GridSpec, x_order: int = 3) -> FrontalJets:
    Ug, Vg = grid.mesh()
    return field_jets(spec, Ug, Vg, x_order=x_order, errors=[])


def validate(spec: FrontalSpec, grid: GridSpec | None = None, tol: float = 1e-9) -> float:
    """Check det I_Omega > 0 and Dx = Omega Lambda^T on the grid; returns the max residual."""
    grid = grid or spec.default_grid(21, 21)
    b = evaluate_grid(spec, grid)
    ok = np.isfinite(b.lambda_det)
    det = la.det2(b.I_Omega)
    if np.any(det[ok] <= 0):
        k = np.argwhere((det <= 0) & ok)[0]
        raise RankDeficientBase(f"det I_Omega <= 0 at {grid.point(k)}")
    res = np.abs(b.Dx - b.Omega @ la.transpose(b.Lambda)).max(axis=(-1, -2))
    worst = float(np.nanmax(res)) if ok.any() else 0.0
    if worst > tol and not spec.expect_violation:
        k = np.unravel_index(np.nanargmax(res), res.shape)
        raise InvalidSpec(f"{spec.name}: Dx != Omega Lambda^T (residual {worst:.3g} at {grid.point(k)})")
    return worst


# Bases -------------------------------------------------------------------------------


def base_from_normal(nu) -> np.ndarray:
    """Two tangent vectors orthogonal to nu, pivoting on its largest coordinate."""
    nu = np.asarray(nu, dtype=float)
    if np.linalg.norm(nu) < 0.5:
        raise DegenerateNormal(f"normal {nu} is too short")
    k = int(np.argmax(np.abs(nu)))
    a, b = [i for i in range(3) if i != k]
    w1 = np.zeros(3)
    w2 = np.zeros(3)
    # With k = 0 this is w1 = (nu2, -nu1, 0), w2 = (nu3, 0, -nu1).
    w1[k], w1[a] = nu[a], -nu[k]
    w2[k], w2[b] = nu[b], -nu[k]
    return np.stack([w1, w2], axis=-1)


def orthonormalize(omega) -> np.ndarray:
    """Gram-Schmidt on the columns; keeps the span and the orientation of w1 x w2."""
    omega = np.asarray(omega, dtype=float)
    w1, w2 = omega[..., :, 0], omega[..., :, 1]
    n1 = np.linalg.norm(w1, axis=-1)
    if np.any(n1 == 0):
        raise RankDeficientBase("first column vanishes")
    e1 = w1 / n1[..., None]
    r = w2 - np.sum(w2 * e1, axis=-1)[..., None] * e1
    n2 = np.linalg.norm(r, axis=-1)
    if np.any(n2 <= 1e-14 * np.linalg.norm(w2, axis=-1)):
        raise RankDeficientBase("columns are parallel")
    return np.stack([e1, r / n2[..., None]], axis=-1)


def orthonormalized_spec(spec: FrontalSpec) -> FrontalSpec:
    """The same frontal with Omega replaced by its Gram-Schmidt orthonormalization (as expressions)."""
    w1 = [spec.omega[i][0] for i in range(3)]
    w2 = [spec.omega[i][1] for i in range(3)]
    n1 = call("sqrt", w1[0] * w1[0] + w1[1] * w1[1] + w1[2] * w1[2])
    e1 = [w / n1 for w in w1]
    p = w2[0] * e1[0] + w2[1] * e1[1] + w2[2] * e1[2]
    r = [w2[i] - p * e1[i] for i in range(3)]
    n2 = call("sqrt", r[0] * r[0] + r[1] * r[1] + r[2] * r[2])
    e2 = [x / n2 for x in r]
    return spec.with_omega([[e1[i], e2[i]] for i in range(3)], name=spec.name + "_orthonormal")


def base_changed_spec(spec: FrontalSpec, C) -> FrontalSpec:
    """Omega' = Omega C for a 2x2 matrix of expressions C."""
    C = [[lift(c) for c in row] for row in C]
    om = [[spec.omega[i][0] * C[0][j] + spec.omega[i][1] * C[1][j] for j in range(2)] for i in range(3)]
    return spec.with_omega(om, name=spec.name + "_rebased")


def reparametrized_spec(spec: FrontalSpec, h, domain=None) -> FrontalSpec:
    """x o h and Omega o h for a map h = (h1, h2) given as expressions in u, v."""
    m = {"u": lift(h[0]), "v": lift(h[1])}
    xs = tuple(substitute(e, m) for e in spec.x)
    om = tuple(tuple(substitute(e, m) for e in row) for row in spec.omega)
    lm = None if spec.lam is None else tuple(tuple(substitute(e, m) for e in row) for row in spec.lam)
    return replace(spec, name=spec.name + "_reparam", x=xs, omega=om, lam=lm, domain=tuple(domain or spec.domain))


def moved_spec(spec: FrontalSpec, O, a) -> FrontalSpec:
    """O x + a and O Omega for an orthogonal matrix O and a vector a."""
    O = np.asarray(O, dtype=float)
    if np.abs(O.T @ O - np.eye(3)).max() > 1e-12:
        raise ValueError("O is not orthogonal")

    def comb(col):
        out = None
        for k in range(3):
            if O[col[0], k] == 0:
                continue
            term = lift(float(O[col[0], k])) * col[1][k]
            out = term if out is None else out + term
        return out if out is not None else lift(0.0)

    xs = tuple(comb((i, spec.x)) + lift(float(a[i])) for i in range(3))
    om = tuple(tuple(comb((i, [spec.omega[k][j] for k in range(3)])) for j in range(2)) for i in range(3))
    return replace(spec, name=spec.name + "_moved", x=xs, omega=om)


# Special reduced base ------------------------------------------------------------------

# Pivot rows of the identity block and whether that block is swapped, for forms 1..6.
FORMS = {
    1: ((0, 1), False),
    2: ((0, 2), False),
    3: ((0, 1), True),
    4: ((1, 2), False),
    5: ((1, 2), True),
    6: ((0, 2), True),
}


@dataclass
class SpecialForm:
    form_index: int
    pivot_rows: tuple[int, int]
    g1: np.ndarray
    g2: np.ndarray
    Lambda_hat: np.ndarray
    identity_residual: float
    min_minor: float


def special_form(spec: FrontalSpec, grid: GridSpec | None = None) -> SpecialForm:
    """Reduce Omega to a block (identity or swap) plus one row (g1, g2).

    The pivot rows are those whose 2x2 minor stays furthest from zero over the
    grid; the block is the identity or the swap so that det C > 0, which keeps
    the normal.  Also reports the residual of the mixed-partial identity
    (a,b)_u . (g1,g2)_v = (a,b)_v . (g1,g2)_u, where D(a,b) = Lambda_hat^T.
    """
    grid = grid or spec.default_grid()
    fj = grid_jets(spec, grid, x_order=2)
    Om = fj.Omega
    best = None
    for rows in ((0, 1), (0, 2), (1, 2)):
        minor = la.det2(values(Om[list(rows), :]))
        m = float(np.nanmin(np.abs(minor)))
        if best is None or m > best[1]:
            best = (rows, m, minor)
    rows, m, minor = best
    if not m > 0:
        raise NoGlobalForm(f"{spec.name}: every pivot minor vanishes somewhere on the grid")
    swapped = bool(np.all(minor < 0))
    if not swapped and not np.all(minor > 0):
        raise NoGlobalForm(f"{spec.name}: pivot minor changes sign on the grid")
    form = next(k for k, val in FORMS.items() if val == (rows, swapped))
    B = np.array([[0.0, 1.0], [1.0, 0.0]]) if swapped else np.eye(2)
    block = Om[list(rows), :]
    C = la.inv2(block) @ B  # Omega_hat = Omega C has block B
    Om_hat = Om @ C
    other = [i for i in range(3) if i not in rows][0]
    g1, g2 = Om_hat[other, 0], Om_hat[other, 1]
    # Dx = Omega Lambda^T = Omega_hat (C^-1 Lambda^T), so Lambda_hat^T = C^-1 Lambda^T.
    Lhat_T = la.inv2(C) @ la.transpose(fj.Lambda)
    Lh = values(la.transpose(Lhat_T))
    ab_u = (Lh[..., 0, 0], Lh[..., 0, 1])
    ab_v = (Lh[..., 1, 0], Lh[..., 1, 1])
    lhs = ab_u[0] * g1.dv + ab_u[1] * g2.dv
    rhs = ab_v[0] * g1.du + ab_v[1] * g2.du
    resid = float(np.nanmax(np.abs(lhs - rhs)))
    return SpecialForm(form, rows, g1.value, g2.value, Lh, resid, m)


# Christoffel decomposition ---------------------------------------------------------------


def christoffel_decomposition_check(bundle: FormBundle, tol_sing: float = DEFAULT_TOL_SING) -> float:
    """max |Gamma_i - (Lambda Theta_i + Lambda_i) Lambda^-1| at a regular point."""
    if not np.all(np.abs(bundle.lambda_det) > tol_sing) or bundle.Gamma1 is None:
        raise SingularPoint(f"lambda_Omega = {bundle.lambda_det} is below tol_sing")
    Linv = la.inv2(bundle.Lambda)
    g1 = (bundle.Lambda @ bundle.Theta1 + bundle.Lambda_u) @ Linv
    g2 = (bundle.Lambda @ bundle.Theta2 + bundle.Lambda_v) @ Linv
    return float(max(np.abs(bundle.Gamma1 - g1).max(), np.abs(bundle.Gamma2 - g2).max()))


def second_form_defect(bundle: FormBundle) -> float:
    """Difference between II_Omega from n . w_{i,u} and from -Omega^T Dn."""
    alt = -la.transpose(bundle.Omega) @ bundle.Dn
    return float(np.nanmax(np.abs(alt - bundle.II_Omega)))


__all__ = [
    "FrontalSpec",
    "FrontalJets",
    "FormBundle",
    "field_jets",
    "grid_jets",
    "evaluate",
    "evaluate_grid",
    "validate",
    "base_from_normal",
    "orthonormalize",
    "orthonormalized_spec",
    "base_changed_spec",
    "reparametrized_spec",
    "moved_spec",
    "special_form",
    "christoffel_decomposition_check",
    "second_form_defect",
    "U",
    "V",
    "parse",
]
