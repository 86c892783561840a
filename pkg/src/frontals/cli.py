"""Command-line front end.

Exit codes: 0 every enabled check passed, 1 a check failed, 2 bad input (parse
error or missing file), 3 evaluation error, 4 reconstruction data not integrable.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import catalog
from .classify import classify_grid
from .compat import (
    CLASSICAL_TOL,
    DEFAULT_RESIDUAL_TOL,
    MembershipViolation,
    ResidualContext,
    all_residuals,
    classical_compatibility_residuals,
    ideal_membership_check,
)
from .exprmap import EvalError
from .frontal import FrontalSpec, InvalidSpec, RankDeficientBase, evaluate_grid
from .grid import GridSpec
from .reconstruct import (
    DataError,
    InterpolationGap,
    NotIntegrable,
    NotPositiveDefinite,
    ReconstructionData,
    StepFailure,
    align_rigid,
    derive_data,
    reconstruct,
    sample_surface,
)
from .specfile import SpecFileError, dump_spec, load_spec

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_EVAL, EXIT_NOT_INTEGRABLE = 0, 1, 2, 3, 4
SUITES = ("rce", "sce", "gauss", "compact", "prope", "wo", "ideal", "classical", "all")
_SUITE_IDS = {
    "rce": [f"c{k}" for k in range(1, 10)],
    "sce": ["cs1", "cs2", "cs3"],
    "gauss": ["gaussT"],
    "compact": [f"cc{k}" for k in range(1, 7)],
    "prope": ["propE_u", "propE_v"],
    "wo": ["wo"],
}
DEFAULT_FROBENIUS_TOL = 1e-2


class InputError(Exception):
    pass


# Summaries ---------------------------------------------------------------------------


def new_summary(command: str, **kw) -> dict:
    return {"command": command, **kw, "checks": {}, "errors": [], "expect_violation": False}


def add_check(summary: dict, name: str, value: float, tol: float, passed: bool | None = None) -> None:
    ok = bool(value <= tol) if passed is None else bool(passed)
    summary["checks"][name] = {"value": _num(value), "tol": tol, "passed": ok}


def exit_code(summary: dict) -> int:
    """The exit status is a function of the summary alone."""
    kinds = {e["kind"] for e in summary["errors"]}
    if "input" in kinds:
        return EXIT_INPUT
    if "not_integrable" in kinds:
        return EXIT_NOT_INTEGRABLE
    failed = any(not c["passed"] for c in summary["checks"].values())
    if summary.get("expect_violation"):
        # A negative control passes exactly when something is violated; evaluation errors count.
        return EXIT_OK if (failed or "eval" in kinds or "violation" in kinds) else EXIT_CHECK
    if "eval" in kinds:
        return EXIT_EVAL
    if failed or "violation" in kinds:
        return EXIT_CHECK
    return EXIT_OK


def _num(x):
    x = float(x)
    return x if np.isfinite(x) else None


def _finish(summary: dict, out: Path | None) -> int:
    code = exit_code(summary)
    summary["exit_status"] = code
    text = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(text)
    sys.stdout.write(text)
    return code


# Writers -----------------------------------------------------------------------------


def write_csv(path: Path, header, columns) -> None:
    """Comma-separated, header row, LF endings, 17 significant digits; strings pass through."""
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(c if isinstance(c, str) else format(float(c), ".17g") for c in row) + "\n")


def write_obj(path: Path, x: np.ndarray) -> None:
    """Vertices of an (nu, nv, 3) point grid followed by 1-indexed quad faces."""
    nu, nv, _ = x.shape
    with open(path, "w", newline="\n") as fh:
        for p in x.reshape(-1, 3):
            fh.write("v " + " ".join(format(float(c), ".17g") for c in p) + "\n")
        for i in range(nu - 1):
            for j in range(nv - 1):
                a = i * nv + j + 1
                fh.write(f"f {a} {a + nv} {a + nv + 1} {a + 1}\n")


# Inputs ------------------------------------------------------------------------------


def resolve_spec(ref: str) -> FrontalSpec:
    """A spec file path, or the name of a catalog entry when no such file exists."""
    p = Path(ref)
    if p.is_file():
        return load_spec(p)
    if ref in catalog.CATALOG:
        return catalog.CATALOG[ref]
    raise InputError(f"no spec file or catalog entry named {ref!r}")


def _grid(spec: FrontalSpec, args) -> GridSpec:
    if getattr(args, "grid", None):
        return GridSpec.parse(args.grid)
    if getattr(args, "h", None):
        return GridSpec.with_spacing(*spec.domain, args.h)
    return spec.default_grid()


def _pair(text: str, n: int, what: str):
    try:
        vals = [float(s) for s in text.split(",")]
    except ValueError:
        raise InputError(f"bad {what} {text!r}") from None
    if len(vals) != n:
        raise InputError(f"{what} needs {n} comma-separated numbers")
    return vals


def _out(args) -> Path | None:
    return Path(args.out) if getattr(args, "out", None) else None


# Commands ----------------------------------------------------------------------------


def cmd_analyze(args) -> int:
    s = new_summary("analyze", spec=args.spec)
    out = _out(args)
    try:
        spec = resolve_spec(args.spec)
        grid = _grid(spec, args)
    except (InputError, SpecFileError, ValueError, OSError) as exc:
        s["errors"].append({"kind": "input", "message": str(exc)})
        return _finish(s, out)
    s.update(spec=spec.name, grid=str(grid), expect_violation=spec.expect_violation)
    try:
        gc = classify_grid(spec, grid, tol_sing=args.tol_sing, tol_class=args.tol_class)
        x = sample_surface(spec, grid)
    except (EvalError, RankDeficientBase, ArithmeticError) as exc:
        s["errors"].append({"kind": "eval", "message": str(exc), **_where(exc)})
        return _finish(s, out)
    b = evaluate_grid(spec, grid)
    for e in b.errors:
        s["errors"].append({"kind": "eval", "message": f"{e.kind}: {e.message}", "u": e.u, "v": e.v})
    s["singular_nodes"] = int(np.sum(gc.singular))
    s["histogram"] = gc.counts()
    s["inconsistent_nodes"] = len(gc.inconsistent)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        U, V = grid.mesh()
        verdicts = [str(v) if v is not None else "Invalid" for v in gc.verdicts.ravel()]
        write_csv(
            out / "nodes.csv",
            ("u", "v", "lambda_det", "K_rel", "H_rel", "verdict"),
            (U.ravel(), V.ravel(), gc.lambda_det.ravel(), gc.K_rel.ravel(), gc.H_rel.ravel(), verdicts),
        )
        write_obj(out / "surface.obj", x)
    return _finish(s, out)


def _where(exc) -> dict:
    if isinstance(exc, EvalError):
        return {"u": exc.u, "v": exc.v}
    return {}


def cmd_check(args) -> int:
    s = new_summary("check", spec=args.spec, suite=args.suite)
    out = _out(args)
    try:
        spec = resolve_spec(args.spec)
        grid = _grid(spec, args)
    except (InputError, SpecFileError, ValueError, OSError) as exc:
        s["errors"].append({"kind": "input", "message": str(exc)})
        return _finish(s, out)
    s.update(spec=spec.name, grid=str(grid), expect_violation=spec.expect_violation)
    suites = [k for k in SUITES if k != "all"] if args.suite == "all" else [args.suite]
    tol = args.tol if args.tol is not None else DEFAULT_RESIDUAL_TOL
    ctx = None
    try:
        if any(k in _SUITE_IDS for k in suites):
            ctx = ResidualContext.build(spec, grid)
            invalid = int(np.sum(~ctx.valid))
            if invalid:
                e = ctx.jets.errors[0]
                s["errors"].append({"kind": "eval", "message": f"{invalid} nodes failed; first: {e.message}", "u": e.u, "v": e.v})
            reports = all_residuals(spec, ctx=ctx)
            for k in suites:
                for eq in _SUITE_IDS.get(k, []):
                    add_check(s, eq, reports[eq].max_abs_residual, tol)
        if "classical" in suites:
            ctx = ctx or ResidualContext.build(spec, grid)
            reports, skipped = classical_compatibility_residuals(ctx=ctx)
            s["classical_skipped_nodes"] = skipped
            for r in reports:
                add_check(s, r.equation, r.max_abs_residual, args.tol if args.tol is not None else CLASSICAL_TOL)
        if "ideal" in suites:
            try:
                rep = ideal_membership_check(spec, raise_on_violation=True)
                s["ideal"] = {"cauchy_diffs": rep.cauchy_diffs, "max_N_singular": rep.max_N_singular}
            except MembershipViolation as exc:
                s["errors"].append({"kind": "violation", "message": f"MembershipViolation: {exc}", "witness": list(exc.witness) if exc.witness else None})
    except (EvalError, RankDeficientBase, InvalidSpec) as exc:
        s["errors"].append({"kind": "eval", "message": str(exc), **_where(exc)})
    return _finish(s, out)


def cmd_roundtrip(args) -> int:
    s = new_summary("roundtrip", spec=args.spec, h=args.h)
    out = _out(args)
    try:
        spec = resolve_spec(args.spec)
        grid = _grid(spec, args)
    except (InputError, SpecFileError, ValueError, OSError) as exc:
        s["errors"].append({"kind": "input", "message": str(exc)})
        return _finish(s, out)
    s.update(spec=spec.name, grid=str(grid))
    stage = "derive"
    try:
        data = derive_data(spec, grid)
        stage = "reconstruct"
        fr = reconstruct(data)
        stage = "align"
        original = sample_surface(spec, grid)
        al = align_rigid(fr.x, original)
    except (EvalError, RankDeficientBase, NotPositiveDefinite, InterpolationGap, StepFailure, MembershipViolation, ValueError) as exc:
        s["errors"].append({"kind": "eval", "stage": stage, "message": f"{type(exc).__name__}: {exc}"})
        return _finish(s, out)
    s["alignment_rms"] = al.rms_error
    s["alignment_max"] = al.max_error
    s["frobenius_residual"] = fr.frobenius_residual
    s["mixed_partial_residual"] = fr.mixed_partial_residual
    s["gram_defect"] = fr.gram_defect
    add_check(s, "alignment_rms", al.rms_error, args.tol)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_obj(out / "original.obj", original)
        write_obj(out / "reconstructed.obj", fr.x @ al.rotation.T + al.translation)
    return _finish(s, out)


def cmd_reconstruct(args) -> int:
    s = new_summary("reconstruct", data=args.data)
    out = _out(args)
    try:
        data = ReconstructionData.load(args.data)
        if args.origin:
            data.origin = tuple(_pair(args.origin, 2, "origin"))
        if args.seed:
            data.seed = np.array(_pair(args.seed, 3, "seed"))
        data.origin_index()
    except (DataError, InputError, ValueError, OSError) as exc:
        s["errors"].append({"kind": "input", "message": str(exc)})
        return _finish(s, out)
    s["grid"] = str(data.grid)
    try:
        fr = reconstruct(data, frobenius_tol=args.tol)
    except NotIntegrable as exc:
        s["frobenius_residual"] = exc.residual
        s["errors"].append({"kind": "not_integrable", "message": str(exc)})
        return _finish(s, out)
    except (NotPositiveDefinite, InterpolationGap, StepFailure, MembershipViolation) as exc:
        s["errors"].append({"kind": "eval", "message": f"{type(exc).__name__}: {exc}"})
        return _finish(s, out)
    s["frobenius_residual"] = fr.frobenius_residual
    s["mixed_partial_residual"] = fr.mixed_partial_residual
    s["position_discrepancy"] = fr.position_discrepancy
    s["gram_defect"] = fr.gram_defect
    s["min_det_W"] = fr.min_det
    s["origin_index"] = list(fr.origin)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_obj(out / "surface.obj", fr.x)
        U, V = data.grid.mesh()
        x = fr.x.reshape(-1, 3)
        write_csv(out / "surface.csv", ("u", "v", "x", "y", "z"), (U.ravel(), V.ravel(), x[:, 0], x[:, 1], x[:, 2]))
    return _finish(s, out)


def cmd_export(args) -> int:
    s = new_summary("export", spec=args.spec)
    try:
        spec = resolve_spec(args.spec)
        grid = _grid(spec, args)
    except (InputError, SpecFileError, ValueError, OSError) as exc:
        s["errors"].append({"kind": "input", "message": str(exc)})
        return _finish(s, None)
    s.update(spec=spec.name, grid=str(grid))
    try:
        data = derive_data(spec, grid)
    except (EvalError, RankDeficientBase) as exc:
        s["errors"].append({"kind": "eval", "message": str(exc), **_where(exc)})
        return _finish(s, None)
    data.save(args.out)
    s["out"] = str(args.out)
    return _finish(s, None)


def cmd_catalog(args) -> int:
    if args.dump:
        if args.dump == "all":
            sys.stdout.write("\n".join(dump_spec(s) for s in catalog.CATALOG.values()))
            return EXIT_OK
        if args.dump not in catalog.CATALOG:
            sys.stderr.write(f"unknown catalog entry {args.dump!r}\n")
            return EXIT_INPUT
        sys.stdout.write(dump_spec(catalog.CATALOG[args.dump]))
        return EXIT_OK
    for s in catalog.CATALOG.values():
        flag = "  [expect_violation]" if s.expect_violation else ""
        x = ", ".join(str(e) for e in s.x)
        sys.stdout.write(f"{s.name:18s} ({x}){flag}\n")
    return EXIT_OK


# Parser ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="frontals", description="Frontal surfaces: analysis, identity checks and reconstruction.")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="classify every grid node and write CSV, OBJ and a summary")
    a.add_argument("spec", help="spec file or catalog name")
    a.add_argument("--grid", help="u0:u1:nu,v0:v1:nv")
    a.add_argument("--out", help="output directory")
    a.add_argument("--tol-sing", type=float, default=1e-8)
    a.add_argument("--tol-class", type=float, default=1e-6)
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("check", help="run residual suites")
    c.add_argument("spec")
    c.add_argument("--suite", choices=SUITES, default="all")
    c.add_argument("--tol", type=float, help="residual tolerance (default 1e-7, classical 1e-6)")
    c.add_argument("--grid")
    c.add_argument("--out")
    c.set_defaults(func=cmd_check)

    r = sub.add_parser("roundtrip", help="derive data, reconstruct, align against the original")
    r.add_argument("spec")
    r.add_argument("--h", type=float, default=0.01)
    r.add_argument("--grid")
    r.add_argument("--tol", type=float, default=1e-4, help="rms tolerance after alignment")
    r.add_argument("--out")
    r.set_defaults(func=cmd_roundtrip)

    q = sub.add_parser("reconstruct", help="integrate frame and surface from a data directory")
    q.add_argument("data", help="directory with manifest.json and field CSV files")
    q.add_argument("--origin", help="u,v")
    q.add_argument("--seed", help="x,y,z")
    q.add_argument("--tol", type=float, default=DEFAULT_FROBENIUS_TOL, help="Frobenius residual threshold")
    q.add_argument("--out")
    q.set_defaults(func=cmd_reconstruct)

    e = sub.add_parser("export", help="write reconstruction data sampled from a spec")
    e.add_argument("spec")
    e.add_argument("--out", required=True)
    e.add_argument("--grid")
    e.add_argument("--h", type=float)
    e.set_defaults(func=cmd_export)

    k = sub.add_parser("catalog", help="list built-in frontals")
    k.add_argument("--dump", metavar="NAME", help="print the spec file of an entry (or 'all')")
    k.set_defaults(func=cmd_catalog)
    return p


_VALUE_FLAGS = ("--grid", "--origin", "--seed")


def _glue_values(argv):
    """Attach values to flags whose arguments often start with '-' (argparse would read them as options)."""
    out, it = [], iter(argv)
    for a in it:
        if a in _VALUE_FLAGS:
            nxt = next(it, None)
            out.append(a if nxt is None else f"{a}={nxt}")
        else:
            out.append(a)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = _glue_values(sys.argv[1:] if argv is None else list(argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2 already
        return int(exc.code or 0)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
