"""Built-in frontals with hand-derived tangent moving bases."""

from __future__ import annotations

from .frontal import FrontalSpec

_ENTRIES = [
    FrontalSpec.from_strings(
        "plane",
        ("u", "v", "0"),
        (("1", "0"), ("0", "1"), ("0", "0")),
        description="flat plane; every object is trivial",
    ),
    FrontalSpec.from_strings(
        "cuspidal_edge",
        ("u", "v^2", "v^3"),
        (("1", "0"), ("0", "1"), ("0", "3/2*v")),
        description="cuspidal edge along v = 0; Lambda = diag(1, 2v)",
    ),
    FrontalSpec.from_strings(
        "swallowtail",
        ("3*u^4 + u^2*v", "4*u^3 + 2*u*v", "v"),
        (("u", "u^2"), ("1", "2*u"), ("0", "1")),
        description="swallowtail; x_u = (12u^2 + 2v) w1, x_v = w2, singular on v = -6u^2",
    ),
    FrontalSpec.from_strings(
        "cuspidal_crosscap",
        ("u", "v^2", "u*v^3"),
        (("1", "0"), ("0", "1"), ("v^3", "3/2*u*v")),
        description="cuspidal cross-cap; Lambda = diag(1, 2v), not a front at the origin",
    ),
    FrontalSpec.from_strings(
        "corank2_front",
        ("u^2", "v^2", "v^3 + u^3"),
        (("2", "0"), ("0", "2"), ("3*u", "3*v")),
        description="rank-0 front at the origin; Lambda = diag(u, v)",
    ),
    FrontalSpec.from_strings(
        "corank2_nonfront",
        ("u*exp(u)", "v^2", "(u^2/2 + u)*v^3"),
        (("exp(u)", "0"), ("0", "2"), ("v^3", "3*(u^2/2 + u)*v")),
        domain=(-2.0, 0.0, -1.0, 1.0),
        description="corank-2 frontal that is not a front at (-1, 0); Lambda = diag(1 + u, v)",
    ),
    FrontalSpec.from_strings(
        "whitney_crosscap",
        ("u", "v^2", "u*v"),
        (("1", "0"), ("0", "1"), ("0", "0")),
        lam=(
            ("sqrt(1 + v^2)", "0"),
            ("u*v/sqrt(1 + v^2)", "sqrt((u^2 + 4*v^2 + 4*v^4)/(1 + v^2))"),
        ),
        expect_violation=True,
        description="Whitney umbrella with a Cholesky factor of I and I_Omega = identity; not a frontal",
    ),
]

CATALOG: dict[str, FrontalSpec] = {s.name: s for s in _ENTRIES}

# The entries that are genuine frontals (everything except the negative control).
GENUINE = tuple(name for name, s in CATALOG.items() if not s.expect_violation)


def get(name: str) -> FrontalSpec:
    try:
        return CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown catalog entry {name!r}; known: {', '.join(CATALOG)}") from None
