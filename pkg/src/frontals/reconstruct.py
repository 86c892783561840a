"""Rebuild a frontal from its coefficient fields.

Given I_Omega, II_Omega and Lambda over a rectangle, the frame W = (w1 w2 n)
solves W_u^T = P W^T and W_v^T = Q W^T, and the surface solves
Dx = Omega Lambda^T.  Both systems are integrated with RK4 in two passes: along
the base row through the origin, then along every column (or the other way
round, which gives an independent path for the integrability check).

The connection matrices need Theta_1, Theta_2, which the data do not contain.
They come from tau_i = N_i / lambda_Omega (see :func:`frontals.compat.li_numerators`);
close to the singular set, where that quotient loses digits, tau is filled by a
local least-squares fit from the surrounding nodes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from . import linalg as la
from .classify import Verdict, _verdict
from .compat import MembershipViolation, li_numerators, theta_from_tau
from .exprmap import eval_taylor
from .frontal import DEFAULT_TOL_SING, FrontalSpec, field_jets, values
from .grid import GridSpec
from .jet import Jet

FIELD_NAMES = (
    "E_Omega",
    "F_Omega",
    "G_Omega",
    "e_Omega",
    "f1_Omega",
    "f2_Omega",
    "g_Omega",
    "lambda11",
    "lambda12",
    "lambda21",
    "lambda22",
)
CSV_COLUMNS = ("u", "v", "value", "du", "dv", "duu", "duv", "dvv")
_DERIV_KEYS = {"value": (0, 0), "du": (1, 0), "dv": (0, 1), "duu": (2, 0), "duv": (1, 1), "dvv": (0, 2)}
MANIFEST = "manifest.json"
DATA_FORMAT = "frontals-data/1"


class DataError(ValueError):
    """Missing or grid-inconsistent reconstruction data."""


class NotPositiveDefinite(ValueError):
    pass


class InterpolationGap(RuntimeError):
    """Too few usable neighbours to fill tau near the singular set."""


class StepFailure(RuntimeError):
    """An integration step produced non-finite values."""


class NotIntegrable(RuntimeError):
    """The Frobenius residual of P, Q exceeds the requested tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class DegenerateCloud(ValueError):
    """The points are collinear or coincident, so the rotation is underdetermined."""


class Order(str, Enum):
    U_FIRST = "UFirst"
    V_FIRST = "VFirst"


# Data ------------------------------------------------------------------------------


@dataclass
class ReconstructionData:
    """The eleven coefficient fields as order-2 jets over a grid, plus the seeds."""

    grid: GridSpec
    fields: dict[str, Jet]
    origin: tuple[float, float] | None = None
    seed: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        missing = [k for k in FIELD_NAMES if k not in self.fields]
        if missing:
            raise DataError(f"missing fields: {', '.join(missing)}")
        for k, j in self.fields.items():
            if j.shape != self.grid.shape:
                raise DataError(f"field {k} has shape {j.shape}, grid is {self.grid.shape}")
        self.seed = np.asarray(self.seed, dtype=float)

    def value(self, name: str) -> np.ndarray:
        return self.fields[name].value

    def _mat(self, names) -> np.ndarray:
        return la.matrix([[self.fields[n] for n in row] for row in names])

    def I_Omega(self) -> np.ndarray:
        return self._mat([["E_Omega", "F_Omega"], ["F_Omega", "G_Omega"]])

    def II_Omega(self) -> np.ndarray:
        return self._mat([["e_Omega", "f1_Omega"], ["f2_Omega", "g_Omega"]])

    def Lambda(self) -> np.ndarray:
        return self._mat([["lambda11", "lambda12"], ["lambda21", "lambda22"]])

    @property
    def lambda_det(self) -> np.ndarray:
        return la.det2(values(self.Lambda()))

    def check_positive(self) -> None:
        E, F, G = self.value("E_Omega"), self.value("F_Omega"), self.value("G_Omega")
        bad = ~((E > 0) & (G > 0) & (E * G - F * F > 0))
        if bad.any():
            k = tuple(np.argwhere(bad)[0])
            raise NotPositiveDefinite(f"I_Omega is not positive definite at {self.grid.point(k)}")

    def singular_mask(self, tol_sing: float = DEFAULT_TOL_SING) -> np.ndarray:
        ld = np.abs(self.lambda_det)
        return ld <= tol_sing * float(ld.max())

    def default_origin(self, tol_sing: float = DEFAULT_TOL_SING) -> tuple[int, int]:
        """Grid centre, or the nearest regular node when the centre is singular."""
        c = self.grid.center_index()
        sing = self.singular_mask(tol_sing)
        if not sing[c]:
            return c
        idx = np.argwhere(~sing)
        if idx.size == 0:
            raise DataError("every node is singular")
        d = np.sum((idx - np.array(c)) ** 2, axis=1)
        return tuple(int(x) for x in idx[int(np.argmin(d))])

    def origin_index(self) -> tuple[int, int]:
        if self.origin is None:
            return self.default_origin()
        u0, v0 = self.origin
        i = int(round((u0 - self.grid.u0) / self.grid.hu))
        j = int(round((v0 - self.grid.v0) / self.grid.hv))
        if not (0 <= i < self.grid.nu and 0 <= j < self.grid.nv):
            raise DataError(f"origin {self.origin} lies outside the grid")
        return (i, j)

    def perturbed(self, name: str, delta: float) -> "ReconstructionData":
        j = self.fields[name]
        c = j.c.copy()
        c[0] = c[0] + delta
        return replace(self, fields={**self.fields, name: Jet(c, j.order)})

    # files -------------------------------------------------------------------

    def save(self, directory) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        U, V = self.grid.mesh()
        files = {}
        for name in FIELD_NAMES:
            j = self.fields[name]
            cols = [U, V] + [j.deriv(*_DERIV_KEYS[c]) for c in CSV_COLUMNS[2:]]
            table = np.stack([np.ravel(c) for c in cols], axis=1)
            fname = f"{name}.csv"
            np.savetxt(d / fname, table, fmt="%.17g", delimiter=",", header=",".join(CSV_COLUMNS), comments="", newline="\n")
            files[name] = fname
        manifest = {
            "format": DATA_FORMAT,
            "grid": str(self.grid),
            "origin": None if self.origin is None else [float(x) for x in self.origin],
            "seed": [float(x) for x in self.seed],
            "fields": files,
        }
        (d / MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n")
        return d

    @classmethod
    def load(cls, directory) -> "ReconstructionData":
        d = Path(directory)
        try:
            manifest = json.loads((d / MANIFEST).read_text())
        except FileNotFoundError:
            raise DataError(f"no {MANIFEST} in {d}") from None
        except json.JSONDecodeError as exc:
            raise DataError(f"bad manifest: {exc}") from exc
        grid = GridSpec.parse(manifest["grid"])
        U, V = grid.mesh()
        fields = {}
        for name in FIELD_NAMES:
            fname = manifest.get("fields", {}).get(name)
            if fname is None:
                raise DataError(f"manifest does not list field {name}")
            fields[name] = _read_field(d / fname, grid, U, V)
        origin = manifest.get("origin")
        return cls(grid, fields, None if origin is None else tuple(origin), np.asarray(manifest.get("seed", [0, 0, 0])))


def _read_field(path: Path, grid: GridSpec, U, V) -> Jet:
    try:
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except FileNotFoundError:
        raise DataError(f"missing field file {path}") from None
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    cols = {h.strip(): k for k, h in enumerate(header)}
    for c in ("u", "v", "value"):
        if c not in cols:
            raise DataError(f"{path}: missing column {c}")
    if table.shape[0] != U.size:
        raise DataError(f"{path}: {table.shape[0]} rows, grid has {U.size} nodes")
    if np.abs(table[:, cols["u"]] - U.ravel()).max() > 1e-9 or np.abs(table[:, cols["v"]] - V.ravel()).max() > 1e-9:
        raise DataError(f"{path}: node coordinates do not match the grid")
    derivs = {}
    for c, key in _DERIV_KEYS.items():
        if c in cols:
            derivs[key] = table[:, cols[c]].reshape(grid.shape)
    _fill_derivatives(derivs, grid)
    return Jet.from_derivs(derivs, 2, grid.shape)


def _fill_derivatives(derivs: dict, grid: GridSpec) -> None:
    """Finite-difference any partials that the file does not provide."""
    h = (grid.hu, grid.hv)
    if (1, 0) not in derivs:
        derivs[(1, 0)] = fd(derivs[(0, 0)], h[0], 0)
    if (0, 1) not in derivs:
        derivs[(0, 1)] = fd(derivs[(0, 0)], h[1], 1)
    if (2, 0) not in derivs:
        derivs[(2, 0)] = fd(derivs[(1, 0)], h[0], 0)
    if (0, 2) not in derivs:
        derivs[(0, 2)] = fd(derivs[(0, 1)], h[1], 1)
    if (1, 1) not in derivs:
        derivs[(1, 1)] = 0.5 * (fd(derivs[(1, 0)], h[1], 1) + fd(derivs[(0, 1)], h[0], 0))


def derive_data(
    spec: FrontalSpec, grid: GridSpec | None = None, origin=None, seed=(0.0, 0.0, 0.0)
) -> ReconstructionData:
    """Sample the eleven coefficient fields of a frontal (exact order-2 jets)."""
    grid = grid or spec.default_grid()
    U, V = grid.mesh()
    fj = field_jets(spec, U, V, x_order=4, omega_order=3)
    IO, II, L = fj.I_Omega, fj.II_Omega, fj.Lambda
    src = {
        "E_Omega": IO[0, 0],
        "F_Omega": IO[0, 1],
        "G_Omega": IO[1, 1],
        "e_Omega": II[0, 0],
        "f1_Omega": II[0, 1],
        "f2_Omega": II[1, 0],
        "g_Omega": II[1, 1],
        "lambda11": L[0, 0],
        "lambda12": L[0, 1],
        "lambda21": L[1, 0],
        "lambda22": L[1, 1],
    }
    fields = {k: j.truncate(2).broadcast_to(grid.shape) for k, j in src.items()}
    return ReconstructionData(grid, fields, origin, np.asarray(seed, dtype=float))


# Finite differences and half-step interpolation -----------------------------------------

_C5 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_L5 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_L5b = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0


def fd(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Fourth-order first derivative: central inside, one-sided five-point stencils at the ends."""
    f = np.moveaxis(np.asarray(f, dtype=float), axis, 0)
    n = f.shape[0]
    if n < 5:
        return np.moveaxis(np.gradient(f, h, axis=0, edge_order=2 if n > 2 else 1), 0, axis)
    out = np.empty_like(f)
    out[2:-2] = sum(_C5[k] * f[k : n - 4 + k] for k in range(5))
    out[0] = sum(_L5[k] * f[k] for k in range(5))
    out[1] = sum(_L5b[k] * f[k] for k in range(5))
    out[-1] = -sum(_L5[k] * f[n - 1 - k] for k in range(5))
    out[-2] = -sum(_L5b[k] * f[n - 1 - k] for k in range(5))
    return np.moveaxis(out / h, 0, axis)


def half_steps(f: np.ndarray, axis: int = 0) -> np.ndarray:
    """Cubic interpolation at the midpoints k + 1/2, k = 0 .. n - 2."""
    f = np.moveaxis(np.asarray(f, dtype=float), axis, 0)
    n = f.shape[0]
    if n < 4:
        return np.moveaxis(0.5 * (f[:-1] + f[1:]), 0, axis)
    out = np.empty((n - 1,) + f.shape[1:])
    out[1:-1] = (-f[:-3] + 9.0 * f[1:-2] + 9.0 * f[2:-1] - f[3:]) / 16.0
    out[0] = (5.0 * f[0] + 15.0 * f[1] - 5.0 * f[2] + f[3]) / 16.0
    out[-1] = (5.0 * f[-1] + 15.0 * f[-2] - 5.0 * f[-3] + f[-4]) / 16.0
    return np.moveaxis(out, 0, axis)


# tau, Theta, P, Q ----------------------------------------------------------------------


@dataclass
class TauTheta:
    tau1: np.ndarray
    tau2: np.ndarray
    Theta1: np.ndarray
    Theta2: np.ndarray
    filled: np.ndarray
    N1: np.ndarray
    N2: np.ndarray


def _fit_center(values_, mask, i, j, half):
    """Biquadratic least squares over the (2 half + 1)^2 window at (i, j); value at the centre."""
    nu, nv = mask.shape
    size = 2 * half + 1
    i0 = min(max(i - half, 0), max(nu - size, 0))
    j0 = min(max(j - half, 0), max(nv - size, 0))
    ii, jj = np.meshgrid(np.arange(i0, min(i0 + size, nu)), np.arange(j0, min(j0 + size, nv)), indexing="ij")
    use = mask[ii, jj]
    x = (ii[use] - i).astype(float)
    y = (jj[use] - j).astype(float)
    A = np.stack([np.ones_like(x), x, y, x * x, x * y, y * y, x * x * y, x * y * y, x * x * y * y], axis=1)
    if A.shape[0] < A.shape[1] or np.linalg.matrix_rank(A) < A.shape[1]:
        return None
    coef, *_ = np.linalg.lstsq(A, values_[:, ii[use], jj[use]].T, rcond=None)
    return coef[0]


def build_tau_theta(
    data: ReconstructionData,
    band: float = 1e-6,
    tol_sing: float = DEFAULT_TOL_SING,
    tol_vanish: float = 1e-8,
) -> TauTheta:
    """tau_i = N_i / lambda_Omega away from the singular set, a local fit near it, and Theta_i.

    Nodes with |lambda_Omega| <= band * max are filled from the others by a
    biquadratic fit over a 5x5 window (7x7 if that is not enough).  N_i must
    vanish on the singular nodes, otherwise tau has no smooth extension.
    """
    N1j, N2j = li_numerators(data.Lambda(), data.I_Omega())
    N1, N2 = N1j.value, N2j.value
    ld = data.lambda_det
    lmax = float(np.abs(ld).max())
    sing = np.abs(ld) <= tol_sing * lmax
    if sing.any():
        nmag = np.maximum(np.abs(N1), np.abs(N2))
        worst = float(nmag[sing].max())
        if worst > tol_vanish:
            k = tuple(np.argwhere(sing & (nmag == worst))[0])
            raise MembershipViolation(f"N = {worst:.3g} does not vanish at singular node {data.grid.point(k)}", data.grid.point(k))
    flagged = np.abs(ld) <= band * lmax
    with np.errstate(all="ignore"):
        tau = np.stack([N1 / ld, N2 / ld])
    tau[:, flagged] = np.nan
    good = ~flagged & np.all(np.isfinite(tau), axis=0)
    for i, j in np.argwhere(flagged):
        val = _fit_center(tau, good, i, j, 2)
        if val is None:
            val = _fit_center(tau, good, i, j, 3)
        if val is None:
            raise InterpolationGap(f"not enough regular neighbours to fill tau at {data.grid.point((i, j))}")
        tau[:, i, j] = val
    IOj = data.I_Omega()
    IO = values(IOj)
    IO_u = np.stack([np.stack([IOj[a, b].du for b in range(2)], -1) for a in range(2)], -2)
    IO_v = np.stack([np.stack([IOj[a, b].dv for b in range(2)], -1) for a in range(2)], -2)
    T1, T2 = theta_from_tau(tau[0], tau[1], IO, IO_u, IO_v)
    return TauTheta(tau[0], tau[1], T1, T2, flagged, N1, N2)


def build_PQ(data: ReconstructionData, Theta1: np.ndarray, Theta2: np.ndarray):
    """P, Q fields of shape (nu, nv, 3, 3) with mu = -II_Omega^T I_Omega^-1."""
    IO = values(data.I_Omega())
    II = values(data.II_Omega())
    mu = -la.transpose(II) @ la.inv2(IO)
    z = np.zeros(data.grid.shape)

    def block(T, c0, c1, m0, m1):
        return np.stack(
            [
                np.stack([T[..., 0, 0], T[..., 0, 1], c0], -1),
                np.stack([T[..., 1, 0], T[..., 1, 1], c1], -1),
                np.stack([m0, m1, z], -1),
            ],
            -2,
        )

    P = block(Theta1, II[..., 0, 0], II[..., 1, 0], mu[..., 0, 0], mu[..., 0, 1])
    Q = block(Theta2, II[..., 0, 1], II[..., 1, 1], mu[..., 1, 0], mu[..., 1, 1])
    return P, Q


def frobenius_field(P: np.ndarray, Q: np.ndarray, grid: GridSpec) -> np.ndarray:
    """P_v - Q_u + PQ - QP with fourth-order finite differences."""
    return fd(P, grid.hv, 1) - fd(Q, grid.hu, 0) + P @ Q - Q @ P


def frobenius_residual(P: np.ndarray, Q: np.ndarray, grid: GridSpec) -> float:
    """Grid max of the entrywise max norm of P_v - Q_u + [P, Q]."""
    return float(np.abs(frobenius_field(P, Q, grid)).max())


# Integration ---------------------------------------------------------------------------


def init_frame(I_Omega0, rotation=None) -> np.ndarray:
    """Upper-triangular W0 with W0^T W0 = blockdiag(I_Omega0, 1); optionally rotated.

    A proper rotation R gives another admissible start R W0 with the same Gram matrix.
    """
    M = np.asarray(I_Omega0, dtype=float)
    E, F, G = M[0, 0], M[0, 1], M[1, 1]
    if not (E > 0 and G > 0 and E * G - F * F > 0):
        raise NotPositiveDefinite(f"I_Omega = {M.tolist()} is not positive definite")
    a = np.sqrt(E)
    b = F / a
    c = np.sqrt(G - b * b)
    W0 = np.array([[a, b, 0.0], [0.0, c, 0.0], [0.0, 0.0, 1.0]])
    if rotation is not None:
        R = np.asarray(rotation, dtype=float)
        if abs(np.linalg.det(R) - 1.0) > 1e-10 or np.abs(R.T @ R - np.eye(3)).max() > 1e-10:
            raise ValueError("rotation must be proper orthogonal")
        W0 = R @ W0
    return W0


def _march_linear(A: np.ndarray, Am: np.ndarray, Y0: np.ndarray, k0: int, h: float) -> np.ndarray:
    """RK4 for Y' = A Y along axis 0 of A (nodes) and Am (midpoints), starting at index k0."""
    n = A.shape[0]
    Y = np.empty((n,) + Y0.shape)
    Y[k0] = Y0

    def step(y, a0, am, a1, s):
        k1 = a0 @ y
        k2 = am @ (y + 0.5 * s * k1)
        k3 = am @ (y + 0.5 * s * k2)
        k4 = a1 @ (y + s * k3)
        return y + s / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    for k in range(k0, n - 1):
        Y[k + 1] = step(Y[k], A[k], Am[k], A[k + 1], h)
    for k in range(k0, 0, -1):
        Y[k - 1] = step(Y[k], A[k], Am[k - 1], A[k - 1], -h)
    if not np.all(np.isfinite(Y)):
        raise StepFailure("frame integration produced non-finite values")
    return Y


def _march_quadrature(f: np.ndarray, fm: np.ndarray, y0: np.ndarray, k0: int, h: float) -> np.ndarray:
    """RK4 for y' = f(s) (no dependence on y), which is Simpson's rule step by step."""
    n = f.shape[0]
    incr = h / 6.0 * (f[:-1] + 4.0 * fm + f[1:])  # integral from k to k + 1
    y = np.empty((n,) + y0.shape)
    y[k0] = y0
    for k in range(k0, n - 1):
        y[k + 1] = y[k] + incr[k]
    for k in range(k0, 0, -1):
        y[k - 1] = y[k] - incr[k - 1]
    if not np.all(np.isfinite(y)):
        raise StepFailure("position integration produced non-finite values")
    return y


def integrate_frame(
    P: np.ndarray, Q: np.ndarray, W0: np.ndarray, grid: GridSpec, origin: tuple[int, int], order: Order = Order.U_FIRST
) -> np.ndarray:
    """Frame field W (nu, nv, 3, 3) from W_u^T = P W^T, W_v^T = Q W^T and W(origin) = W0."""
    i0, j0 = origin
    Y0 = np.asarray(W0, dtype=float).T
    if Order(order) is Order.U_FIRST:
        row = _march_linear(P[:, j0], half_steps(P[:, j0], 0), Y0, i0, grid.hu)  # (nu, 3, 3)
        Qc = np.swapaxes(Q, 0, 1)  # (nv, nu, 3, 3)
        Y = np.swapaxes(_march_linear(Qc, half_steps(Qc, 0), row, j0, grid.hv), 0, 1)
    else:
        col = _march_linear(Q[i0], half_steps(Q[i0], 0), Y0, j0, grid.hv)  # (nv, 3, 3)
        Y = _march_linear(P, half_steps(P, 0), col, i0, grid.hu)
    return np.swapaxes(Y, -1, -2)


def tangent_field(W: np.ndarray, Lam: np.ndarray):
    """x_u = lambda11 w1 + lambda12 w2 and x_v = lambda21 w1 + lambda22 w2."""
    w1, w2 = W[..., :, 0], W[..., :, 1]
    xu = Lam[..., 0, 0, None] * w1 + Lam[..., 0, 1, None] * w2
    xv = Lam[..., 1, 0, None] * w1 + Lam[..., 1, 1, None] * w2
    return xu, xv


def integrate_position(
    W: np.ndarray, Lam: np.ndarray, q, grid: GridSpec, origin: tuple[int, int], order: Order = Order.U_FIRST
) -> np.ndarray:
    """Surface x (nu, nv, 3) from Dx = Omega Lambda^T with x(origin) = q."""
    i0, j0 = origin
    xu, xv = tangent_field(W, Lam)
    q = np.asarray(q, dtype=float)
    if Order(order) is Order.U_FIRST:
        row = _march_quadrature(xu[:, j0], half_steps(xu[:, j0], 0), q, i0, grid.hu)
        xc = np.swapaxes(xv, 0, 1)
        return np.swapaxes(_march_quadrature(xc, half_steps(xc, 0), row, j0, grid.hv), 0, 1)
    col = _march_quadrature(xv[i0], half_steps(xv[i0], 0), q, j0, grid.hv)
    return _march_quadrature(xu, half_steps(xu, 0), col, i0, grid.hu)


@dataclass
class FrameField:
    W: np.ndarray
    x: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    frobenius_residual: float
    mixed_partial_residual: float
    position_discrepancy: float
    gram_defect: float
    min_det: float
    normal_defect: float
    origin: tuple[int, int]
    tau: TauTheta | None = None


def gram_defect(W: np.ndarray, I_Omega: np.ndarray) -> float:
    target = np.zeros(W.shape)
    target[..., :2, :2] = I_Omega
    target[..., 2, 2] = 1.0
    return float(np.abs(la.transpose(W) @ W - target).max())


def normal_defect(W: np.ndarray) -> float:
    c = np.cross(W[..., :, 0], W[..., :, 1])
    n = c / np.linalg.norm(c, axis=-1, keepdims=True)
    return float(np.abs(n - W[..., :, 2]).max())


def reconstruct(
    data: ReconstructionData,
    order: Order = Order.U_FIRST,
    W0=None,
    rotation=None,
    frobenius_tol: float | None = None,
) -> FrameField:
    """The full pipeline: tau and Theta, P and Q, the frame, the surface and their witnesses."""
    data.check_positive()
    Lam = values(data.Lambda())
    if not np.any(Lam):
        return _constant_frontal(data, W0, rotation)
    origin = data.origin_index()
    tt = build_tau_theta(data)
    P, Q = build_PQ(data, tt.Theta1, tt.Theta2)
    fres = frobenius_residual(P, Q, data.grid)
    if frobenius_tol is not None and fres > frobenius_tol:
        raise NotIntegrable(f"Frobenius residual {fres:.3g} exceeds {frobenius_tol:.3g}", fres)
    IO = values(data.I_Omega())
    if W0 is None:
        W0 = init_frame(IO[origin], rotation)
    other = Order.V_FIRST if Order(order) is Order.U_FIRST else Order.U_FIRST
    W = integrate_frame(P, Q, W0, data.grid, origin, order)
    W_alt = integrate_frame(P, Q, W0, data.grid, origin, other)
    x = integrate_position(W, Lam, data.seed, data.grid, origin, order)
    x_alt = integrate_position(W, Lam, data.seed, data.grid, origin, other)
    return FrameField(
        W=W,
        x=x,
        P=P,
        Q=Q,
        frobenius_residual=fres,
        mixed_partial_residual=float(np.abs(W - W_alt).max()),
        position_discrepancy=float(np.abs(x - x_alt).max()),
        gram_defect=gram_defect(W, IO),
        min_det=float(np.linalg.det(W).min()),
        normal_defect=normal_defect(W),
        origin=origin,
        tau=tt,
    )


def _constant_frontal(data: ReconstructionData, W0, rotation) -> FrameField:
    """Lambda = 0 everywhere: Dx = 0 forces x = q, while tau and hence the frame are undetermined.

    The frame is reported as the constant W0; the integrability witnesses are NaN.
    """
    IO = values(data.I_Omega())
    # Every node is singular, so the default rule (nearest regular node) does not apply.
    origin = data.grid.center_index() if data.origin is None else data.origin_index()
    if W0 is None:
        W0 = init_frame(IO[origin], rotation)
    shape = data.grid.shape
    W = np.broadcast_to(np.asarray(W0, dtype=float), shape + (3, 3)).copy()
    x = np.broadcast_to(data.seed, shape + (3,)).copy()
    nan = float("nan")
    P = np.full(shape + (3, 3), nan)
    return FrameField(W, x, P, P.copy(), nan, 0.0, 0.0, nan, float(np.linalg.det(W0)), normal_defect(W[:1, :1]), origin)


def data_residuals(data: ReconstructionData, tt: TauTheta | None = None) -> dict[str, float]:
    """Validation directly on the data: the Omega-Gauss equation and the two Codazzi-type
    equations c7, c8, read off the finite-difference Frobenius matrix.

    The (1,2), (1,3) and (2,3) entries of P_v - Q_u + [P, Q] are these three identities
    once mu = -II_Omega^T I_Omega^-1, and they need no regular points.
    """
    tt = tt or build_tau_theta(data)
    P, Q = build_PQ(data, tt.Theta1, tt.Theta2)
    M = frobenius_field(P, Q, data.grid)
    return {
        "gaussT": float(np.abs(M[..., 0, 1]).max()),
        "c7": float(np.abs(M[..., 0, 2]).max()),
        "c8": float(np.abs(M[..., 1, 2]).max()),
    }


# Rigid alignment -----------------------------------------------------------------------


@dataclass
class AlignmentResult:
    rotation: np.ndarray
    translation: np.ndarray
    rms_error: float
    max_error: float


def align_rigid(x_a, x_b) -> AlignmentResult:
    """Proper rigid motion (R, t) minimizing sum |R x_a + t - x_b|^2 (Kabsch with det R = +1)."""
    a = np.asarray(x_a, dtype=float).reshape(-1, 3)
    b = np.asarray(x_b, dtype=float).reshape(-1, 3)
    if a.shape != b.shape:
        raise ValueError("point sets must have the same shape")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("point sets contain non-finite values")
    ca, cb = a.mean(axis=0), b.mean(axis=0)
    A, B = a - ca, b - cb
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0 or s[1] <= 1e-12 * s[0]:
        raise DegenerateCloud("points are coincident or collinear")
    U_, _, Vt = np.linalg.svd(A.T @ B)
    d = np.sign(np.linalg.det(Vt.T @ U_.T)) or 1.0
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U_.T
    t = cb - R @ ca
    err = np.linalg.norm(a @ R.T + t - b, axis=1)
    return AlignmentResult(R, t, float(np.sqrt(np.mean(err**2))), float(err.max()))


def sample_surface(spec: FrontalSpec, grid: GridSpec) -> np.ndarray:
    """x over the grid, shape (nu, nv, 3)."""
    U, V = grid.mesh()
    return np.stack([eval_taylor(e, U, V, 0).value for e in spec.x], axis=-1)


# Classification of the reconstruction ----------------------------------------------------


def classify_reconstruction(
    frame: FrameField, grid: GridSpec, tol_sing: float = 1e-6, tol_class: float = 1e-6
) -> np.ndarray:
    """Verdict field of the reconstructed surface.

    Lambda and mu are recovered from finite differences of the integrated x and n
    against the integrated base, so the verdicts test the output, not the input data.
    The singular tolerance is looser than for exact jets because of integration error.
    """
    W, x = frame.W, frame.x
    Om = W[..., :, :2]
    n = W[..., :, 2]
    IOinv = la.inv2(la.transpose(Om) @ Om)
    Dx = np.stack([fd(x, grid.hu, 0), fd(x, grid.hv, 1)], axis=-1)
    Dn = np.stack([fd(n, grid.hu, 0), fd(n, grid.hv, 1)], axis=-1)
    Lam = la.transpose(IOinv @ la.transpose(Om) @ Dx)
    mu = la.transpose(IOinv @ la.transpose(Om) @ Dn)
    ld = la.det2(Lam)
    ls = float(np.abs(Lam).max()) or 1.0
    ms = float(np.abs(mu).max()) or 1.0
    K = la.det2(mu)
    H = -0.5 * np.trace(mu @ la.adj2(Lam), axis1=-2, axis2=-1)
    sing = np.abs(ld) <= tol_sing * float(np.abs(ld).max())
    out = np.empty(grid.shape, dtype=object)
    for idx in np.ndindex(grid.shape):
        out[idx] = _verdict(bool(sing[idx]), K[idx] / ms**2, H[idx] / (ms * ls), tol_class)
    return out


__all__ = [
    "FIELD_NAMES",
    "ReconstructionData",
    "derive_data",
    "build_tau_theta",
    "build_PQ",
    "frobenius_residual",
    "init_frame",
    "integrate_frame",
    "integrate_position",
    "reconstruct",
    "align_rigid",
    "sample_surface",
    "classify_reconstruction",
    "data_residuals",
    "Verdict",
]
