"""Differential geometry of frontal surfaces and reconstruction from fundamental data."""

from .catalog import CATALOG, GENUINE
from .classify import Verdict, classify_grid, classify_point, limit_identity_check
from .compat import (
    MembershipViolation,
    ResidualContext,
    all_residuals,
    classical_compatibility_residuals,
    ideal_membership_check,
)
from .exprmap import DivisionByZero, DomainViolation, EvalError, ExprError, parse
from .frontal import FrontalSpec, evaluate, evaluate_grid
from .grid import GridSpec
from .reconstruct import (
    NotIntegrable,
    Order,
    ReconstructionData,
    align_rigid,
    derive_data,
    reconstruct,
    sample_surface,
)
from .specfile import SpecFileError, dump_spec, load_spec, parse_spec

__version__ = "0.1.0"

__all__ = [
    "CATALOG",
    "GENUINE",
    "Verdict",
    "classify_grid",
    "classify_point",
    "limit_identity_check",
    "MembershipViolation",
    "ResidualContext",
    "all_residuals",
    "classical_compatibility_residuals",
    "ideal_membership_check",
    "DivisionByZero",
    "DomainViolation",
    "EvalError",
    "ExprError",
    "parse",
    "FrontalSpec",
    "evaluate",
    "evaluate_grid",
    "GridSpec",
    "NotIntegrable",
    "Order",
    "ReconstructionData",
    "align_rigid",
    "derive_data",
    "reconstruct",
    "sample_surface",
    "SpecFileError",
    "dump_spec",
    "load_spec",
    "parse_spec",
]
