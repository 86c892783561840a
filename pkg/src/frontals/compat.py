"""Residual suites for the integrability identities of a frontal.

Every identity is evaluated pointwise over a grid from the jet pipeline of
:mod:`frontals.frontal`, so derivatives of mu, Theta and II_Omega are exact to
rounding.  A residual is always reported as LHS - RHS of the identity.

Notation: ``ta(T, i, j)`` is entry (i, j) of a Theta matrix with 1-based
indices, so Theta_1 = ((ta(T1,1,1), ta(T1,1,2)), (ta(T1,2,1), ta(T1,2,2))).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import linalg as la
from .exprmap import eval_taylor, lift
from .frontal import DEFAULT_TOL_SING, FrontalJets, FrontalSpec, d_u, d_v, field_jets, grid_jets, values
from .grid import GridSpec

DEFAULT_RESIDUAL_TOL = 1e-7
CLASSICAL_TOL = 1e-6
# Nodes with |lambda_Omega| above this are treated as regular by the classical suite.
CLASSICAL_LAMBDA_MIN = 1e-3


class MembershipViolation(RuntimeError):
    """The ideal-membership proxy failed; `witness` is the offending (u, v)."""

    def __init__(self, message: str, witness, report=None):
        super().__init__(message)
        self.witness = witness
        self.report = report


@dataclass
class ResidualReport:
    equation: str
    max_abs_residual: float
    argmax: tuple[float, float] | None
    samples: list[tuple[tuple[float, float], float]]
    field: np.ndarray = field(repr=False)
    invalid: int = 0

    def passed(self, tol: float = DEFAULT_RESIDUAL_TOL) -> bool:
        return self.max_abs_residual <= tol


def _report(name: str, res: np.ndarray, grid: GridSpec, mask=None, n_samples: int = 5) -> ResidualReport:
    """Reduce a signed residual field (grid shape, possibly with trailing component axes)."""
    res = np.asarray(res, dtype=float)
    mag = np.abs(res)
    if mag.ndim > 2:
        mag = mag.reshape(mag.shape[:2] + (-1,)).max(axis=-1)
    ok = np.isfinite(mag)
    if mask is not None:
        ok &= mask
    invalid = int(np.sum(~np.isfinite(mag) & (mask if mask is not None else True)))
    if not ok.any():
        return ResidualReport(name, 0.0, None, [], mag, invalid)
    flat = np.where(ok, mag, -1.0).ravel()
    order = np.argsort(flat)[::-1][:n_samples]
    samples = [(grid.point(np.unravel_index(k, mag.shape)), float(flat[k])) for k in order if flat[k] >= 0]
    return ResidualReport(name, samples[0][1], samples[0][0], samples, np.where(ok, mag, np.nan), invalid)


# Numeric views of the jet objects ----------------------------------------------------


def _attr(m: np.ndarray, name: str) -> np.ndarray:
    first = m.flat[0]
    out = np.empty(np.shape(first.value) + m.shape)
    for k in np.ndindex(m.shape):
        out[(...,) + k] = getattr(m[k], name)
    return out


@dataclass
class _Fields:
    """Values and first partials of the objects entering the identities."""

    T1: np.ndarray
    T2: np.ndarray
    T1u: np.ndarray
    T1v: np.ndarray
    T2u: np.ndarray
    T2v: np.ndarray
    mu: np.ndarray
    mu_u: np.ndarray
    mu_v: np.ndarray
    II: np.ndarray
    II_u: np.ndarray
    II_v: np.ndarray
    L: np.ndarray
    L_u: np.ndarray
    L_v: np.ndarray
    IO: np.ndarray
    IO_u: np.ndarray
    IO_v: np.ndarray
    Omega: np.ndarray
    Dn: np.ndarray
    lambda_det: np.ndarray

    @classmethod
    def from_jets(cls, fj: FrontalJets) -> "_Fields":
        g = lambda m: (values(m), _attr(m, "du"), _attr(m, "dv"))  # noqa: E731
        T1, T1u, T1v = g(fj.Theta1)
        T2, T2u, T2v = g(fj.Theta2)
        mu, mu_u, mu_v = g(fj.mu)
        II, II_u, II_v = g(fj.II_Omega)
        L, L_u, L_v = g(fj.Lambda)
        IO, IO_u, IO_v = g(fj.I_Omega)
        return cls(T1, T2, T1u, T1v, T2u, T2v, mu, mu_u, mu_v, II, II_u, II_v, L, L_u, L_v, IO, IO_u, IO_v,
                   values(fj.Omega), values(fj.Dn), la.det2(L))


def _ta(T, i, j):
    return T[..., i - 1, j - 1]


# Individual identities ---------------------------------------------------------------


def rce_fields(f: _Fields) -> dict[str, np.ndarray]:
    """Signed residuals of the nine relative compatibility equations, written out entrywise."""
    T1, T2 = f.T1, f.T2
    a = lambda i, j: _ta(T1, i, j)  # noqa: E731
    b = lambda i, j: _ta(T2, i, j)  # noqa: E731
    e, f1, f2, g = f.II[..., 0, 0], f.II[..., 0, 1], f.II[..., 1, 0], f.II[..., 1, 1]
    m = lambda i, j: f.mu[..., i - 1, j - 1]  # noqa: E731
    out = {}
    out["c1"] = (_ta(f.T1v, 1, 1) - _ta(f.T2u, 1, 1)) - (
        b(1, 1) * a(1, 1) - a(1, 1) * b(1, 1) + b(1, 2) * a(2, 1) - b(2, 1) * a(1, 2) + m(1, 1) * f1 - m(2, 1) * e
    )
    out["c2"] = (_ta(f.T1v, 1, 2) - _ta(f.T2u, 1, 2)) - (
        b(1, 1) * a(1, 2) + b(1, 2) * a(2, 2) - a(1, 1) * b(1, 2) - a(1, 2) * b(2, 2) + m(1, 2) * f1 - m(2, 2) * e
    )
    out["c3"] = (_ta(f.T1v, 2, 1) - _ta(f.T2u, 2, 1)) - (
        b(2, 1) * a(1, 1) + b(2, 2) * a(2, 1) - a(2, 1) * b(1, 1) - a(2, 2) * b(2, 1) + m(1, 1) * g - m(2, 1) * f2
    )
    out["c4"] = (_ta(f.T1v, 2, 2) - _ta(f.T2u, 2, 2)) - (
        b(2, 2) * a(2, 2) - a(2, 2) * b(2, 2) + a(1, 2) * b(2, 1) - b(1, 2) * a(2, 1) + m(1, 2) * g - m(2, 2) * f2
    )
    out["c5"] = (f.mu_v[..., 0, 0] - f.mu_u[..., 1, 0]) - (
        a(1, 1) * m(2, 1) + a(2, 1) * m(2, 2) - b(1, 1) * m(1, 1) - b(2, 1) * m(1, 2)
    )
    out["c6"] = (f.mu_v[..., 0, 1] - f.mu_u[..., 1, 1]) - (
        a(1, 2) * m(2, 1) + a(2, 2) * m(2, 2) - b(1, 2) * m(1, 1) - b(2, 2) * m(1, 2)
    )
    out["c7"] = (f.II_v[..., 0, 0] - f.II_u[..., 0, 1]) - (
        e * b(1, 1) + f2 * b(1, 2) - f1 * a(1, 1) - g * a(1, 2)
    )
    out["c8"] = (f.II_v[..., 1, 0] - f.II_u[..., 1, 1]) - (
        e * b(2, 1) + f2 * b(2, 2) - f1 * a(2, 1) - g * a(2, 2)
    )
    out["c9"] = cc6_field(f)
    return out


def cc6_field(f: _Fields) -> np.ndarray:
    """Symmetry defect of mu II_Omega; the same quantity is reported as c9."""
    mII = f.mu @ f.II
    return mII[..., 0, 1] - mII[..., 1, 0]


def connection_matrices(f: _Fields):
    """P and Q with the Theta block, the II_Omega column and the mu row, plus their partials."""

    def block(T, col, murow):
        z = np.zeros(T.shape[:-2])
        return np.stack(
            [
                np.stack([T[..., 0, 0], T[..., 0, 1], col[0]], axis=-1),
                np.stack([T[..., 1, 0], T[..., 1, 1], col[1]], axis=-1),
                np.stack([murow[0], murow[1], z], axis=-1),
            ],
            axis=-2,
        )

    II, II_v, II_u = f.II, f.II_v, f.II_u
    P = block(f.T1, (II[..., 0, 0], II[..., 1, 0]), (f.mu[..., 0, 0], f.mu[..., 0, 1]))
    Q = block(f.T2, (II[..., 0, 1], II[..., 1, 1]), (f.mu[..., 1, 0], f.mu[..., 1, 1]))
    P_v = block(f.T1v, (II_v[..., 0, 0], II_v[..., 1, 0]), (f.mu_v[..., 0, 0], f.mu_v[..., 0, 1]))
    Q_u = block(f.T2u, (II_u[..., 0, 1], II_u[..., 1, 1]), (f.mu_u[..., 1, 0], f.mu_u[..., 1, 1]))
    return P, Q, P_v, Q_u


def frobenius_matrix(f: _Fields) -> np.ndarray:
    """P_v - Q_u + PQ - QP from exact jet derivatives."""
    P, Q, P_v, Q_u = connection_matrices(f)
    return P_v - Q_u + P @ Q - Q @ P


# Entry of the matrix identity matching each cI, with the sign of LHS - RHS.
RCE_MATRIX_ENTRY = {
    "c1": ((0, 0), 1.0),
    "c2": ((0, 1), 1.0),
    "c3": ((1, 0), 1.0),
    "c4": ((1, 1), 1.0),
    "c5": ((2, 0), 1.0),
    "c6": ((2, 1), 1.0),
    "c7": ((0, 2), 1.0),
    "c8": ((1, 2), 1.0),
    "c9": ((2, 2), 1.0),
}


def sce_fields(f: _Fields) -> dict[str, np.ndarray]:
    a = lambda i, j: _ta(f.T1, i, j)  # noqa: E731
    b = lambda i, j: _ta(f.T2, i, j)  # noqa: E731
    l = lambda i, j: f.L[..., i - 1, j - 1]  # noqa: E731
    e, f1, f2, g = f.II[..., 0, 0], f.II[..., 0, 1], f.II[..., 1, 0], f.II[..., 1, 1]
    return {
        "cs1": (f.L_v[..., 0, 0] - f.L_u[..., 1, 0])
        - (a(1, 1) * l(2, 1) + a(2, 1) * l(2, 2) - b(1, 1) * l(1, 1) - b(2, 1) * l(1, 2)),
        "cs2": (f.L_v[..., 0, 1] - f.L_u[..., 1, 1])
        - (a(1, 2) * l(2, 1) + a(2, 2) * l(2, 2) - b(1, 2) * l(1, 1) - b(2, 2) * l(1, 2)),
        "cs3": (l(1, 1) * f1 + l(1, 2) * g) - (l(2, 1) * e + l(2, 2) * f2),
    }


def gauss_omega_field(f: _Fields) -> np.ndarray:
    a = lambda i, j: _ta(f.T1, i, j)  # noqa: E731
    b = lambda i, j: _ta(f.T2, i, j)  # noqa: E731
    lhs = (
        _ta(f.T2u, 1, 2)
        - _ta(f.T1v, 1, 2)
        + b(1, 1) * a(1, 2)
        + b(1, 2) * a(2, 2)
        - a(1, 2) * b(2, 2)
        - a(1, 1) * b(1, 2)
    )
    K = la.det2(f.mu)
    return lhs + f.IO[..., 0, 0] * K


def compact_fields(f: _Fields) -> dict[str, np.ndarray]:
    """The matrix forms; row identities keep a trailing component axis."""
    L, T1, T2 = f.L, f.T1, f.T2
    cc1 = (L @ T1 + f.L_u)[..., 1, :] - (L @ T2 + f.L_v)[..., 0, :]
    LII = L @ f.II
    cc2 = LII[..., 0, 1] - LII[..., 1, 0]
    II1 = f.II[..., :, 0:1]  # first column, (..., 2, 1)
    II2 = f.II[..., :, 1:2]
    mu1 = f.mu[..., 0:1, :]  # e1^T mu, (..., 1, 2)
    mu2 = f.mu[..., 1:2, :]
    cc3 = f.T1v - f.T2u + T1 @ T2 - T2 @ T1 + II1 @ mu2 - II2 @ mu1
    cc4 = (f.mu @ T1 + f.mu_u)[..., 1, :] - (f.mu @ T2 + f.mu_v)[..., 0, :]
    IIT = la.transpose(f.II)
    # The derivative term enters transposed; only then are the two components c7 and c8
    # for a non-symmetric II_Omega.
    cc5 = (IIT @ la.transpose(T1) - la.transpose(f.II_u))[..., 1, :] - (IIT @ la.transpose(T2) - la.transpose(f.II_v))[..., 0, :]
    return {"cc1": cc1, "cc2": cc2, "cc3": cc3, "cc4": cc4, "cc5": cc5, "cc6": cc6_field(f)}


def prop_e_fields(f: _Fields) -> dict[str, np.ndarray]:
    """I_Omega Theta_i^T + Theta_i I_Omega - (I_Omega)_i."""
    IO = f.IO
    return {
        "propE_u": IO @ la.transpose(f.T1) + f.T1 @ IO - f.IO_u,
        "propE_v": IO @ la.transpose(f.T2) + f.T2 @ IO - f.IO_v,
    }


def wo_field(f: _Fields) -> np.ndarray:
    """Dn - Omega mu^T."""
    return f.Dn - f.Omega @ la.transpose(f.mu)


def li_numerators(Lam: np.ndarray, IO: np.ndarray):
    """N1, N2 (jets) of the ideal-membership conditions, with I = Lambda I_Omega Lambda^T.

    N1 = L1_u I_O L2^T - L1 I_O L2_u^T + E_v - F_u and N2 the v-analogue with F_v - G_u,
    where L1, L2 are the rows of Lambda.
    """
    I = Lam @ IO @ la.transpose(Lam)
    E, F, G = I[0, 0], I[0, 1], I[1, 1]
    r1, r2 = Lam[0:1, :], Lam[1:2, :]
    r1u, r2u, r1v, r2v = d_u(r1), d_u(r2), d_v(r1), d_v(r2)
    N1 = (r1u @ IO @ la.transpose(r2))[0, 0] - (r1 @ IO @ la.transpose(r2u))[0, 0] + E.d_v() - F.d_u()
    N2 = (r1v @ IO @ la.transpose(r2))[0, 0] - (r1 @ IO @ la.transpose(r2v))[0, 0] + F.d_v() - G.d_u()
    return N1, N2


def theta_from_tau(tau1, tau2, IO, IO_u, IO_v):
    """Theta_i = ((0, -tau_i), (tau_i, 0)) + (I_Omega)_i) I_Omega^-1 / 2 on numeric arrays."""
    z = np.zeros_like(tau1)

    def skew(t):
        return np.stack([np.stack([z, -t], axis=-1), np.stack([t, z], axis=-1)], axis=-2)

    inv = la.inv2(IO)
    with np.errstate(invalid="ignore"):
        return 0.5 * (skew(tau1) + IO_u) @ inv, 0.5 * (skew(tau2) + IO_v) @ inv


# Suites ------------------------------------------------------------------------------


@dataclass
class ResidualContext:
    """Grid, jets and numeric fields shared by the suites."""

    spec: FrontalSpec | None
    grid: GridSpec
    jets: FrontalJets
    fields: _Fields

    @classmethod
    def build(cls, spec: FrontalSpec, grid: GridSpec | None = None) -> "ResidualContext":
        grid = grid or spec.default_grid()
        fj = grid_jets(spec, grid, x_order=3)
        return cls(spec, grid, fj, _Fields.from_jets(fj))

    @property
    def valid(self) -> np.ndarray:
        return self.jets.valid


def _ctx(spec, grid, ctx) -> ResidualContext:
    if ctx is not None:
        return ctx
    if isinstance(spec, ResidualContext):
        return spec
    return ResidualContext.build(spec, grid)


def rce_residuals(spec=None, grid: GridSpec | None = None, ctx: ResidualContext | None = None) -> list[ResidualReport]:
    c = _ctx(spec, grid, ctx)
    return [_report(k, r, c.grid, c.valid) for k, r in rce_fields(c.fields).items()]


def rce_matrix_consistency(spec=None, grid=None, ctx: ResidualContext | None = None) -> float:
    """Largest gap between the entrywise equations and the entries of P_v - Q_u + [P, Q]."""
    c = _ctx(spec, grid, ctx)
    M = frobenius_matrix(c.fields)
    gap = 0.0
    for name, r in rce_fields(c.fields).items():
        (i, j), s = RCE_MATRIX_ENTRY[name]
        d = np.abs(s * M[..., i, j] - r)[c.valid]
        gap = max(gap, float(np.nanmax(d)) if d.size else 0.0)
    return gap


def sce_residuals(spec=None, grid=None, ctx: ResidualContext | None = None) -> list[ResidualReport]:
    c = _ctx(spec, grid, ctx)
    return [_report(k, r, c.grid, c.valid) for k, r in sce_fields(c.fields).items()]


def gauss_omega_residual(spec=None, grid=None, ctx: ResidualContext | None = None) -> ResidualReport:
    c = _ctx(spec, grid, ctx)
    return _report("gaussT", gauss_omega_field(c.fields), c.grid, c.valid)


def compact_residuals(spec=None, grid=None, ctx: ResidualContext | None = None) -> list[ResidualReport]:
    c = _ctx(spec, grid, ctx)
    return [_report(k, r, c.grid, c.valid) for k, r in compact_fields(c.fields).items()]


def prop_e_residuals(spec=None, grid=None, ctx: ResidualContext | None = None) -> list[ResidualReport]:
    c = _ctx(spec, grid, ctx)
    return [_report(k, r, c.grid, c.valid) for k, r in prop_e_fields(c.fields).items()]


def wo_residual(spec=None, grid=None, ctx: ResidualContext | None = None) -> ResidualReport:
    c = _ctx(spec, grid, ctx)
    return _report("wo", wo_field(c.fields), c.grid, c.valid)


def classical_compatibility_residuals(
    spec=None, grid=None, ctx: ResidualContext | None = None, lambda_min: float = CLASSICAL_LAMBDA_MIN
) -> tuple[list[ResidualReport], int]:
    """Classical Gauss and both Mainardi-Codazzi equations on nodes with |lambda_Omega| > lambda_min.

    Returns the reports and the number of skipped (singular or near-singular) nodes.
    With g_k = Gamma_k, the symbol of the classical notation with indices (i, j, k)
    is g_k[i-1, j-1].
    """
    c = _ctx(spec, grid, ctx)
    fj = c.jets
    regular = c.valid & (np.abs(c.fields.lambda_det) > lambda_min)
    with np.errstate(all="ignore"):
        g1, g2 = fj.christoffel()
        G1, G2 = values(g1), values(g2)
        G2u, G1v = _attr(g2, "du"), _attr(g1, "dv")
        I = values(fj.I)
        II, II_u, II_v = values(fj.II), _attr(fj.II, "du"), _attr(fj.II, "dv")
        K = la.det2(II) / la.det2(I)
        ga = lambda G, i, j: G[..., i - 1, j - 1]  # noqa: E731
        gauss = (
            G2u[..., 0, 1]
            - G1v[..., 0, 1]
            + ga(G2, 1, 1) * ga(G1, 1, 2)
            + ga(G2, 1, 2) * ga(G2, 1, 2)
            - ga(G1, 1, 2) * ga(G2, 2, 2)
            - ga(G1, 1, 1) * ga(G2, 1, 2)
        ) + I[..., 0, 0] * K
        e, f, g = II[..., 0, 0], II[..., 0, 1], II[..., 1, 1]
        mc1 = (II_v[..., 0, 0] - II_u[..., 0, 1]) - (
            e * ga(G2, 1, 1) + f * (ga(G2, 1, 2) - ga(G1, 1, 1)) - g * ga(G1, 1, 2)
        )
        mc2 = (II_v[..., 0, 1] - II_u[..., 1, 1]) - (
            e * ga(G2, 2, 1) + f * (ga(G2, 2, 2) - ga(G2, 1, 1)) - g * ga(G2, 1, 2)
        )
    reports = [
        _report("gauss_classical", gauss, c.grid, regular),
        _report("mc1", mc1, c.grid, regular),
        _report("mc2", mc2, c.grid, regular),
    ]
    return reports, int(np.sum(~regular))


def all_residuals(spec, grid=None, ctx: ResidualContext | None = None) -> dict[str, ResidualReport]:
    """Every Omega-relative suite keyed by equation id (classical suite excluded)."""
    c = _ctx(spec, grid, ctx)
    out = {}
    for r in rce_residuals(ctx=c) + sce_residuals(ctx=c) + compact_residuals(ctx=c) + prop_e_residuals(ctx=c):
        out[r.equation] = r
    out["gaussT"] = gauss_omega_residual(ctx=c)
    out["wo"] = wo_residual(ctx=c)
    return out


def perturb_second_form(ctx: ResidualContext, dII) -> ResidualContext:
    """Context with II_Omega replaced by II_Omega + dII (expressions) and mu recomputed.

    Only the second form and mu change, so propE still holds while the
    identities involving II_Omega generally break.
    """
    fj = ctx.jets
    order = fj.II_Omega[0, 0].order
    d = np.empty((2, 2), dtype=object)
    for i in range(2):
        for j in range(2):
            d[i, j] = eval_taylor(lift(dII[i][j]), fj.u, fj.v, order)
    II = np.empty((2, 2), dtype=object)
    for k in np.ndindex(2, 2):
        II[k] = fj.II_Omega[k] + d[k]
    mu = -(la.transpose(II) @ la.inv2(fj.I_Omega))
    new = replace(fj, II_Omega=II, mu=mu)
    return ResidualContext(ctx.spec, ctx.grid, new, _Fields.from_jets(new))


# Ideal membership ----------------------------------------------------------------------


@dataclass
class MembershipReport:
    grids: list[GridSpec]
    singular_nodes: int
    max_N_singular: float
    cauchy_diffs: list[float]
    cauchy_witness: tuple[float, float] | None
    theta_mismatch: float | None
    theta_excluded: int
    singular_blocks: list[tuple[float, float]]
    invalid_nodes: int
    violations: list[str]
    witness: tuple[float, float] | None

    @property
    def ok(self) -> bool:
        return not self.violations


def _li_level(spec: FrontalSpec, grid: GridSpec):
    Ug, Vg = grid.mesh()
    fj = field_jets(spec, Ug, Vg, x_order=2, errors=[])
    N1, N2 = li_numerators(fj.Lambda, fj.I_Omega)
    ldet = la.det2(values(fj.Lambda))
    ok = fj.valid & np.isfinite(ldet)
    return fj, N1.value, N2.value, ldet, ok


def _singular_blocks(singular: np.ndarray, grid: GridSpec) -> list[tuple[float, float]]:
    s = singular
    blk = s[:-1, :-1] & s[1:, :-1] & s[:-1, 1:] & s[1:, 1:]
    return [grid.point(k) for k in np.argwhere(blk)]


def _interp_new_nodes(coarse: np.ndarray, coarse_ok: np.ndarray):
    """Bilinear prediction of the refined grid from the coarse one; NaN where any donor is unusable."""
    c = np.where(coarse_ok, coarse, np.nan)
    nu, nv = c.shape
    fine = np.full((2 * nu - 1, 2 * nv - 1), np.nan)
    fine[::2, ::2] = c
    fine[1::2, ::2] = 0.5 * (c[:-1, :] + c[1:, :])
    fine[::2, 1::2] = 0.5 * (c[:, :-1] + c[:, 1:])
    fine[1::2, 1::2] = 0.25 * (c[:-1, :-1] + c[1:, :-1] + c[:-1, 1:] + c[1:, 1:])
    new = np.ones(fine.shape, dtype=bool)
    new[::2, ::2] = False
    return fine, new


def ideal_membership_check(
    spec: FrontalSpec,
    grid: GridSpec | None = None,
    refinement_levels: int = 3,
    tol_sing: float = DEFAULT_TOL_SING,
    tol_vanish: float = 1e-8,
    tol_theta: float = DEFAULT_RESIDUAL_TOL,
    band: float = 0.1,
    raise_on_violation: bool = True,
) -> MembershipReport:
    """Numerical proxy for N_1, N_2 lying in the ideal generated by lambda_Omega.

    (a) |N_i| <= tol_vanish on singular nodes;
    (b) tau_i = N_i / lambda_Omega is Cauchy under refinement inside the band
        |lambda_Omega| < band * max: the sup difference between the bilinear
        prediction from level l and the values on the new nodes of level l + 1
        must at least halve from one level to the next (or already be negligible);
    (c) Theta_i rebuilt from tau match the direct Theta_i (skipped when Lambda is
        supplied as data, since then there is no base to compare with).
    A 2x2 block of singular nodes is reported because the singular set must have
    empty interior.
    """
    if refinement_levels < 2:
        raise ValueError("refinement_levels must be at least 2")
    grid = grid or spec.default_grid(41, 41)
    grids = [grid.refined(k) for k in range(refinement_levels)]
    violations: list[str] = []
    witness = None

    taus, oks, base = [], [], None
    for lvl, g in enumerate(grids):
        fj, N1, N2, ldet, ok = _li_level(spec, g)
        lmax = float(np.nanmax(np.abs(ldet[ok]))) if ok.any() else 1.0
        singular = ok & (np.abs(ldet) <= tol_sing * lmax)
        regular = ok & ~singular
        with np.errstate(all="ignore"):
            tau = np.stack([N1 / ldet, N2 / ldet])
        taus.append(tau)
        oks.append(regular & (np.abs(ldet) < band * lmax))
        if lvl == 0:
            base = (g, fj, N1, N2, ldet, ok, singular, regular, tau, lmax)

    g0, fj0, N1, N2, ldet0, ok0, sing0, reg0, tau0, lmax0 = base
    Nmag = np.maximum(np.abs(N1), np.abs(N2))
    max_N_sing = float(Nmag[sing0].max()) if sing0.any() else 0.0
    if max_N_sing > tol_vanish:
        k = np.unravel_index(np.argmax(np.where(sing0, Nmag, -1.0)), Nmag.shape)
        witness = g0.point(k)
        violations.append(f"(a) |N| = {max_N_sing:.3g} at singular node {witness}")
    blocks = _singular_blocks(sing0, g0)
    if blocks:
        violations.append(f"singular set has a 2x2 block of nodes at {blocks[0]}")
        witness = witness or blocks[0]

    diffs, wit = [], None
    for lvl in range(len(grids) - 1):
        d_best, w_best = 0.0, None
        for comp in range(2):
            pred, new = _interp_new_nodes(taus[lvl][comp], np.isfinite(taus[lvl][comp]) & _usable(oks, taus, lvl))
            fine = taus[lvl + 1][comp]
            use = new & oks[lvl + 1] & np.isfinite(pred) & np.isfinite(fine)
            if use.any():
                d = np.where(use, np.abs(pred - fine), -1.0)
                k = np.unravel_index(np.argmax(d), d.shape)
                if d[k] > d_best:
                    d_best, w_best = float(d[k]), grids[lvl + 1].point(k)
        diffs.append(d_best)
        wit = w_best
    scale = max(1.0, max((float(np.nanmax(np.abs(t[:, o]))) if o.any() else 0.0) for t, o in zip(taus, oks)))
    atol = 1e-6 * scale
    if len(diffs) >= 2 and not diffs[-1] <= max(0.5 * diffs[-2], atol):
        violations.append(f"(b) tau is not Cauchy under refinement: sup differences {', '.join(f'{d:.3g}' for d in diffs)}")
        witness = witness or wit
    elif len(diffs) == 1 and not diffs[0] <= atol:
        violations.append(f"(b) tau changes by {diffs[0]:.3g} under one refinement")
        witness = witness or wit

    theta_mis, excluded = None, 0
    if spec.lam is None:
        IO = values(fj0.I_Omega)
        IO_u, IO_v = _attr(fj0.I_Omega, "du"), _attr(fj0.I_Omega, "dv")
        # Close to the singular set N / lambda loses digits, so those nodes are left out.
        safe = reg0 & (np.abs(ldet0) > 1e-6 * lmax0)
        excluded = int(np.sum(ok0 & ~safe))
        T1, T2 = theta_from_tau(tau0[0], tau0[1], IO, IO_u, IO_v)
        d = np.maximum(np.abs(T1 - values(fj0.Theta1)).max(axis=(-1, -2)), np.abs(T2 - values(fj0.Theta2)).max(axis=(-1, -2)))
        theta_mis = float(d[safe].max()) if safe.any() else 0.0
        if theta_mis > tol_theta:
            k = np.unravel_index(np.argmax(np.where(safe, d, -1.0)), d.shape)
            violations.append(f"(c) rebuilt Theta differs by {theta_mis:.3g} at {g0.point(k)}")
            witness = witness or g0.point(k)

    report = MembershipReport(
        grids, int(sing0.sum()), max_N_sing, diffs, wit, theta_mis, excluded, blocks,
        int(np.sum(~ok0)), violations, witness,
    )
    if violations and raise_on_violation:
        raise MembershipViolation("; ".join(violations), witness, report)
    return report


def _usable(oks, taus, lvl):
    # Donors may sit outside the band as long as they are regular; only the targets are banded.
    return np.isfinite(taus[lvl][0]) & np.isfinite(taus[lvl][1])
