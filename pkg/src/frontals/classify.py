"""Relative curvatures and the pointwise taxonomy of singular points.

At a singular point of a frontal the pair (K_Omega, H_Omega) decides everything:
H_Omega != 0 means a front with rank Dx = 1, H_Omega = 0 with K_Omega != 0 means
a front with rank Dx = 0, and both zero means the frontal is not a front there.
The rank of the stacked 4x2 matrix [Lambda^T; mu^T] gives an independent answer
that must agree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import linalg as la
from .exprmap import eval_grid, eval_taylor, lift
from .frontal import (
    DEFAULT_TOL_SING,
    FormBundle,
    FrontalSpec,
    base_changed_spec,
    bundle_from_jets,
    field_jets,
    evaluate,
    evaluate_grid,
    moved_spec,
    reparametrized_spec,
)
from .grid import GridSpec

DEFAULT_TOL_CLASS = 1e-6


class Verdict(str, Enum):
    REGULAR = "Regular"
    FRONT_RANK1 = "FrontRank1"
    FRONT_RANK0 = "FrontRank0"
    NOT_FRONT = "NotFrontHere"

    def __str__(self) -> str:
        return self.value


class InconsistentClassification(RuntimeError):
    """The curvature test and the stacked-matrix rank test disagree."""


class NoRegularNeighbors(ValueError):
    pass


@dataclass
class ClassificationReport:
    point: tuple[float, float]
    lambda_det: float
    K_rel: float
    H_rel: float
    K_classical: float | None
    H_classical: float | None
    dx_rank: int
    verdict: Verdict


def relative_curvatures(bundle: FormBundle):
    """(K_Omega, H_Omega) = (det mu, -tr(mu adj Lambda) / 2); works on grids too."""
    mu, lam = bundle.mu, bundle.Lambda
    K = la.det2(mu)
    H = -0.5 * np.trace(mu @ la.adj2(lam), axis1=-2, axis2=-1)
    return K, H


def classical_curvatures(bundle: FormBundle):
    """K = det II / det I and H = -tr(alpha) / 2 with alpha = -II^T I^-1 (regular points only)."""
    with np.errstate(all="ignore"):
        K = la.det2(bundle.II) / la.det2(bundle.I)
        alpha = -la.transpose(bundle.II) @ la.inv2(bundle.I)
        H = -0.5 * np.trace(alpha, axis1=-2, axis2=-1)
    return K, H


def _verdict(singular, K, H, tol_class):
    if not singular:
        return Verdict.REGULAR
    if abs(H) > tol_class:
        return Verdict.FRONT_RANK1
    if abs(K) > tol_class:
        return Verdict.FRONT_RANK0
    return Verdict.NOT_FRONT


def classify_point(
    bundle: FormBundle,
    tol_sing: float = DEFAULT_TOL_SING,
    tol_class: float = DEFAULT_TOL_CLASS,
    lambda_scale: float = 1.0,
    mu_scale: float = 1.0,
) -> ClassificationReport:
    """Verdict at one point.

    `lambda_scale` and `mu_scale` normalize Lambda and mu (grid sweeps pass their
    grid-max norms) so that the zero tests are scale free.  The singular test is
    |lambda_Omega| <= tol_sing * lambda_scale**2.
    """
    K, H = relative_curvatures(bundle)
    K, H, ldet = float(K), float(H), float(bundle.lambda_det)
    singular = not abs(ldet) > tol_sing * lambda_scale**2
    Kn = K / mu_scale**2
    Hn = H / (mu_scale * lambda_scale)
    verdict = _verdict(singular, Kn, Hn, tol_class)
    Kc = Hc = None
    if not singular:
        kc, hc = classical_curvatures(bundle)
        Kc, Hc = float(kc), float(hc)
    dx_rank = int(la.rank_tol(bundle.Dx / lambda_scale))
    if singular:
        stacked = np.concatenate([la.transpose(bundle.Lambda) / lambda_scale, la.transpose(bundle.mu) / mu_scale])
        front = int(la.rank_tol(stacked, tol_class)) == 2
        if front != (verdict != Verdict.NOT_FRONT):
            raise InconsistentClassification(
                f"at {bundle.point}: curvature test says {verdict}, rank of [Lambda^T; mu^T] says "
                f"{'front' if front else 'not a front'} (K={K:.3g}, H={H:.3g})"
            )
    return ClassificationReport(bundle.point, ldet, K, H, Kc, Hc, dx_rank, verdict)


@dataclass
class GridClassification:
    grid: GridSpec
    verdicts: np.ndarray  # object array of Verdict
    lambda_det: np.ndarray
    K_rel: np.ndarray
    H_rel: np.ndarray
    singular: np.ndarray
    lambda_scale: float
    mu_scale: float
    crossings: list = field(default_factory=list)
    # nodes where the curvature and rank tests disagree: (index, verdict, rank says front)
    inconsistent: list = field(default_factory=list)

    def counts(self) -> dict[str, int]:
        out = {v.value: 0 for v in Verdict}
        for v in self.verdicts.ravel():
            if v is not None:
                out[v.value] += 1
        return out

    def at(self, u: float, v: float) -> Verdict:
        i = int(round((u - self.grid.u0) / self.grid.hu))
        j = int(round((v - self.grid.v0) / self.grid.hv))
        return self.verdicts[i, j]


def _scales(b: FormBundle) -> tuple[float, float]:
    ls = float(np.nanmax(np.abs(b.Lambda)))
    ms = float(np.nanmax(np.abs(b.mu)))
    return (ls if ls > 0 else 1.0), (ms if ms > 0 else 1.0)


def classify_grid(
    spec: FrontalSpec,
    grid: GridSpec | None = None,
    tol_sing: float = DEFAULT_TOL_SING,
    tol_class: float = DEFAULT_TOL_CLASS,
    refine_crossings: bool = False,
    strict: bool = False,
) -> GridClassification:
    """Classify every node; singular means |lambda_Omega| <= tol_sing * max over the grid.

    Where the curvature test and the stacked rank test disagree (both quantities
    sit right at tol_class) the node is recorded in `inconsistent`; with
    strict=True the first disagreement raises InconsistentClassification.
    """
    grid = grid or spec.default_grid()
    b = evaluate_grid(spec, grid, tol_sing)
    ls, ms = _scales(b)
    K, H = relative_curvatures(b)
    ldet = b.lambda_det
    lmax = float(np.nanmax(np.abs(ldet)))
    singular = np.abs(ldet) <= tol_sing * lmax
    Kn, Hn = K / ms**2, H / (ms * ls)
    out = np.empty(grid.shape, dtype=object)
    bad = []
    for idx in np.ndindex(grid.shape):
        if not np.isfinite(ldet[idx]):
            out[idx] = None
            continue
        out[idx] = _verdict(bool(singular[idx]), Kn[idx], Hn[idx], tol_class)
        if singular[idx]:
            stacked = np.concatenate([b.Lambda[idx].T / ls, b.mu[idx].T / ms])
            front = int(la.rank_tol(stacked, tol_class)) == 2
            if front != (out[idx] != Verdict.NOT_FRONT):
                if strict:
                    raise InconsistentClassification(
                        f"at {grid.point(idx)}: verdict {out[idx]} but stacked rank says front={front}"
                    )
                bad.append((idx, out[idx], front))
    result = GridClassification(grid, out, ldet, K, H, singular, ls, ms, inconsistent=bad)
    if refine_crossings:
        result.crossings = singular_crossings(spec, grid, ldet, tol_class=tol_class, scales=(ls, ms))
    return result


def singular_crossings(spec, grid, ldet, tol_class=DEFAULT_TOL_CLASS, scales=(1.0, 1.0), iters: int = 60):
    """Locate sign changes of lambda_Omega along grid edges by bisection and classify there.

    All edges are bisected together, one vectorized evaluation per step.
    """
    ls, ms = scales
    U, Vg = grid.mesh()
    p0s, p1s, f0s = [], [], []
    for axis in (0, 1):
        a = ldet[:-1, :] if axis == 0 else ldet[:, :-1]
        b = ldet[1:, :] if axis == 0 else ldet[:, 1:]
        step = np.array([grid.hu, 0.0]) if axis == 0 else np.array([0.0, grid.hv])
        for i, j in np.argwhere(a * b < 0):
            p0s.append((U[i, j], Vg[i, j]))
            p1s.append((U[i, j] + step[0], Vg[i, j] + step[1]))
            f0s.append(a[i, j])
    if not p0s:
        return []
    p0, p1, f0 = np.array(p0s), np.array(p1s), np.array(f0s)
    for _ in range(iters):
        pm = 0.5 * (p0 + p1)
        fm = np.asarray(evaluate_grid_points(spec, pm[:, 0], pm[:, 1]).lambda_det)
        same = (fm < 0) == (f0 < 0)
        p0 = np.where(same[:, None], pm, p0)
        f0 = np.where(same, fm, f0)
        p1 = np.where(same[:, None], p1, pm)
    pm = 0.5 * (p0 + p1)
    K, H = relative_curvatures(evaluate_grid_points(spec, pm[:, 0], pm[:, 1]))
    return [
        ((float(p[0]), float(p[1])), _verdict(True, float(k) / ms**2, float(h) / (ms * ls), tol_class))
        for p, k, h in zip(pm, K, H)
    ]


# Limits at singular points ------------------------------------------------------------


@dataclass
class LimitReport:
    point: tuple[float, float]
    K_rel: float
    H_rel: float
    radii: list[float]
    K_errors: list[float]
    H_errors: list[float]

    @property
    def monotone(self) -> bool:
        e = self.K_errors[-3:]
        return all(e[k + 1] <= e[k] for k in range(len(e) - 1))

    @property
    def converged(self) -> bool:
        return self.K_errors[-1] <= 1e-4 and self.H_errors[-1] <= 1e-4


def limit_identity_check(
    spec: FrontalSpec,
    p_singular,
    radii=(1e-1, 5e-2, 2e-2, 1e-2, 5e-3, 2e-3, 1e-3),
    n_angles: int = 16,
    tol_sing: float = DEFAULT_TOL_SING,
) -> LimitReport:
    """Compare lambda_Omega K and lambda_Omega H at regular points on shrinking circles
    with K_Omega and H_Omega at the singular point."""
    u0, v0 = p_singular
    b0 = evaluate(spec, u0, v0)
    K0, H0 = (float(x) for x in relative_curvatures(b0))
    # Half-step angles keep the samples off coordinate axes, where catalog singular sets often lie.
    ang = (np.arange(n_angles) + 0.5) * 2 * np.pi / n_angles
    kerr, herr = [], []
    for r in radii:
        uu, vv = u0 + r * np.cos(ang), v0 + r * np.sin(ang)
        b = evaluate_grid_points(spec, uu, vv)
        ok = np.abs(b.lambda_det) > tol_sing
        if not ok.any():
            raise NoRegularNeighbors(f"no regular samples at radius {r}")
        Kc, Hc = classical_curvatures(b)
        kerr.append(float(np.max(np.abs(b.lambda_det[ok] * Kc[ok] - K0))))
        herr.append(float(np.max(np.abs(b.lambda_det[ok] * Hc[ok] - H0))))
    return LimitReport((u0, v0), K0, H0, list(radii), kerr, herr)


def evaluate_grid_points(spec: FrontalSpec, u, v) -> FormBundle:
    """FormBundle at arbitrary sample arrays (no Christoffel symbols)."""
    return bundle_from_jets(field_jets(spec, np.asarray(u), np.asarray(v)), gamma=False)


# Invariance checks --------------------------------------------------------------------


@dataclass
class InvarianceReport:
    ok: bool
    sign_mismatches: int
    zero_set_mismatches: int
    verdicts_equal: bool
    details: str = ""


def _zero_and_sign(K, H, ls, ms, tol_class):
    Kn, Hn = K / ms**2, H / (ms * ls)
    return np.abs(Kn) <= tol_class, np.abs(Hn) <= tol_class, np.sign(K), np.sign(H)


def _compare(b0: FormBundle, b1: FormBundle, tol_class: float, k_sign=1.0, h_sign=1.0) -> InvarianceReport:
    """Compare zero sets, signs and singular verdicts; b1 is expected to carry K*k_sign, H*h_sign."""
    K0, H0 = relative_curvatures(b0)
    K1, H1 = relative_curvatures(b1)
    l0, m0 = _scales(b0)
    l1, m1 = _scales(b1)
    zk0, zh0, sk0, sh0 = _zero_and_sign(K0, H0, l0, m0, tol_class)
    zk1, zh1, sk1, sh1 = _zero_and_sign(K1, H1, l1, m1, tol_class)
    zero_mis = int(np.sum(zk0 != zk1) + np.sum(zh0 != zh1))
    sign_mis = int(np.sum(~zk0 & ~zk1 & (sk0 * k_sign != sk1)) + np.sum(~zh0 & ~zh1 & (sh0 * h_sign != sh1)))
    s0 = np.abs(b0.lambda_det) <= DEFAULT_TOL_SING * np.nanmax(np.abs(b0.lambda_det))
    s1 = np.abs(b1.lambda_det) <= DEFAULT_TOL_SING * np.nanmax(np.abs(b1.lambda_det))
    # 2 regular, 1 rank-1 front, 0 rank-0 front, -1 not a front
    v0 = np.where(s0, np.where(~zh0, 1, np.where(~zk0, 0, -1)), 2)
    v1 = np.where(s1, np.where(~zh1, 1, np.where(~zk1, 0, -1)), 2)
    same = bool(np.array_equal(v0, v1))
    detail = f"{zero_mis} zero-set and {sign_mis} sign mismatches; verdict fields {'agree' if same else 'differ'}"
    return InvarianceReport(zero_mis == 0 and sign_mis == 0 and same, sign_mis, zero_mis, same, detail)


def base_change_invariance_check(
    spec: FrontalSpec, C_field, grid: GridSpec | None = None, tol_class: float = DEFAULT_TOL_CLASS
) -> InvarianceReport:
    """Recompute with Omega' = Omega C (det C > 0): zero sets and signs of K_Omega, H_Omega must not change."""
    grid = grid or spec.default_grid(41, 41)
    other = base_changed_spec(spec, C_field)
    b0 = evaluate_grid(spec, grid)
    b1 = evaluate_grid(other, grid)
    C = np.array([[_eval_c(c, grid) for c in row] for row in C_field])
    detC = C[0, 0] * C[1, 1] - C[0, 1] * C[1, 0]
    if np.any(detC <= 0):
        raise ValueError("det C must be positive on the grid")
    return _compare(b0, b1, tol_class)


def _eval_c(c, grid):
    return eval_grid(lift(c), grid).values


def symmetry_invariance_check(
    spec: FrontalSpec,
    isometry=None,
    reparam=None,
    grid: GridSpec | None = None,
    tol_class: float = DEFAULT_TOL_CLASS,
) -> InvarianceReport:
    """Zero sets of K_Omega, H_Omega under x -> O x + a and under x -> x o h.

    For a reparametrization the new frontal is sampled on `grid` and compared with
    the original sampled at h(grid).  A reflection (det O = -1) flips the normal,
    so only the sign of H is allowed to change.
    """
    grid = grid or spec.default_grid(41, 41)
    other = spec
    h_sign = 1.0
    if isometry is not None:
        O, a = isometry
        other = moved_spec(other, O, a)
        h_sign = float(np.sign(np.linalg.det(np.asarray(O, dtype=float))))
    if reparam is None:
        return _compare(evaluate_grid(spec, grid), evaluate_grid(other, grid), tol_class, h_sign=h_sign)
    U, V = grid.mesh()
    hu = eval_taylor(lift(reparam[0]), U, V, 1)
    hv = eval_taylor(lift(reparam[1]), U, V, 1)
    jac = hu.du * hv.dv - hu.dv * hv.du
    if np.any(np.abs(jac) < 1e-12):
        raise ValueError("reparametrization has a singular Jacobian on the grid")
    other = reparametrized_spec(other, reparam)
    # K and H pick up the factor det Dh; only its sign matters here.
    s = np.sign(jac)
    return _compare(evaluate_grid_points(spec, hu.value, hv.value), evaluate_grid(other, grid), tol_class, s, s * h_sign)
