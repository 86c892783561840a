"""Plain-text spec files.

One ``key = value`` pair per line; blank lines and lines starting with ``#``
are ignored.  Keys::

    name            identifier (required)
    x.1 x.2 x.3     parametrization (required)
    omega.IJ        tangent moving base, I = 1..3, J = 1..2 (required)
    lambda.IJ       optional Lambda, I, J = 1..2 (only for negative controls)
    domain.u0 domain.u1 domain.v0 domain.v1   (default -1, 1, -1, 1)
    grid.nu grid.nv                           (optional default grid)
    expect_violation  true/false              (default false)
    description     free text
"""

from __future__ import annotations

from .exprmap import ExprError, parse, to_text
from .frontal import FrontalSpec

_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}
_X_KEYS = ("x.1", "x.2", "x.3")
_OMEGA_KEYS = tuple(f"omega.{i}{j}" for i in (1, 2, 3) for j in (1, 2))
_LAMBDA_KEYS = tuple(f"lambda.{i}{j}" for i in (1, 2) for j in (1, 2))
_DOMAIN_KEYS = ("domain.u0", "domain.u1", "domain.v0", "domain.v1")
_KNOWN = {"name", "description", "expect_violation", "grid.nu", "grid.nv", *_X_KEYS, *_OMEGA_KEYS, *_LAMBDA_KEYS, *_DOMAIN_KEYS}


class SpecFileError(ValueError):
    """A spec file that cannot be parsed; `line` is 1-based (0 when not tied to a line)."""

    def __init__(self, message: str, line: int = 0, source: str = "<spec>"):
        where = f"{source}:{line}: " if line else f"{source}: "
        super().__init__(where + message)
        self.line = line
        self.source = source


def parse_spec(text: str, source: str = "<spec>") -> FrontalSpec:
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SpecFileError(f"expected 'key = value', got {line!r}", lineno, source)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KNOWN:
            raise SpecFileError(f"unknown key {key!r}", lineno, source)
        if key in entries:
            raise SpecFileError(f"duplicate key {key!r}", lineno, source)
        entries[key] = (value, lineno)

    def need(key):
        if key not in entries:
            raise SpecFileError(f"missing required key {key!r}", 0, source)
        return entries[key]

    def expr(key):
        value, lineno = need(key)
        try:
            return parse(value)
        except ExprError as exc:
            raise SpecFileError(f"{key}: {exc} (column {exc.offset + 1})", lineno, source) from exc

    def number(key, default, kind=float):
        if key not in entries:
            return default
        value, lineno = entries[key]
        try:
            return kind(value)
        except ValueError:
            raise SpecFileError(f"{key}: not a number: {value!r}", lineno, source) from None

    name = need("name")[0]
    if not name:
        raise SpecFileError("empty name", entries["name"][1], source)
    x = tuple(expr(k) for k in _X_KEYS)
    omega = tuple(tuple(expr(f"omega.{i}{j}") for j in (1, 2)) for i in (1, 2, 3))
    lam = None
    present = [k for k in _LAMBDA_KEYS if k in entries]
    if present:
        if len(present) != 4:
            raise SpecFileError("lambda needs all four entries lambda.11 .. lambda.22", entries[present[0]][1], source)
        lam = tuple(tuple(expr(f"lambda.{i}{j}") for j in (1, 2)) for i in (1, 2))
    domain = tuple(number(k, d) for k, d in zip(_DOMAIN_KEYS, (-1.0, 1.0, -1.0, 1.0)))
    if not (domain[1] > domain[0] and domain[3] > domain[2]):
        raise SpecFileError(f"empty domain {domain}", entries.get("domain.u0", ("", 0))[1], source)
    nu, nv = number("grid.nu", None, int), number("grid.nv", None, int)
    if (nu is None) != (nv is None):
        raise SpecFileError("give both grid.nu and grid.nv or neither", 0, source)
    if nu is not None and (nu < 2 or nv < 2):
        raise SpecFileError("grid needs at least 2 nodes per direction", entries["grid.nu"][1], source)
    ev = False
    if "expect_violation" in entries:
        value, lineno = entries["expect_violation"]
        if value.lower() not in _BOOL:
            raise SpecFileError(f"expect_violation: expected true or false, got {value!r}", lineno, source)
        ev = _BOOL[value.lower()]
    return FrontalSpec(
        name=name,
        x=x,
        omega=omega,
        domain=domain,
        lam=lam,
        expect_violation=ev,
        grid_shape=None if nu is None else (nu, nv),
        description=entries.get("description", ("", 0))[0],
    )


def load_spec(path) -> FrontalSpec:
    with open(path) as fh:
        return parse_spec(fh.read(), source=str(path))


def dump_spec(spec: FrontalSpec) -> str:
    """Spec file text that parses back to an equal FrontalSpec."""
    lines = [f"name = {spec.name}"]
    if spec.description:
        lines.append(f"description = {spec.description}")
    for k, e in zip(_X_KEYS, spec.x):
        lines.append(f"{k} = {to_text(e)}")
    for i in range(3):
        for j in range(2):
            lines.append(f"omega.{i + 1}{j + 1} = {to_text(spec.omega[i][j])}")
    if spec.lam is not None:
        for i in range(2):
            for j in range(2):
                lines.append(f"lambda.{i + 1}{j + 1} = {to_text(spec.lam[i][j])}")
    for k, d in zip(_DOMAIN_KEYS, spec.domain):
        lines.append(f"{k} = {d!r}")
    if spec.grid_shape is not None:
        lines.append(f"grid.nu = {spec.grid_shape[0]}")
        lines.append(f"grid.nv = {spec.grid_shape[1]}")
    if spec.expect_violation:
        lines.append("expect_violation = true")
    return "\n".join(lines) + "\n"
