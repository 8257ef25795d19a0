"""Numerical workbench for defining functions that are plurisubharmonic on the boundary."""

__version__ = "0.1.0"

from .cxcalc import HermitianForm, complex_hessian, fd_hessian_oracle, hessian_apply, third_form, wirtinger_gradient
from .domain import (
    CATALOG_IDS,
    BoundarySample,
    CollarPoint,
    DomainSpec,
    get_domain,
    project_to_boundary,
    sample_boundary,
    taylor_normal_check,
    unit_normal,
)
from .expr import ParseError, parse_field_expression
from .fields import ScalarField

__all__ = [
    "BoundarySample",
    "CATALOG_IDS",
    "CollarPoint",
    "DomainSpec",
    "HermitianForm",
    "ParseError",
    "ScalarField",
    "complex_hessian",
    "fd_hessian_oracle",
    "get_domain",
    "hessian_apply",
    "parse_field_expression",
    "project_to_boundary",
    "sample_boundary",
    "taylor_normal_check",
    "third_form",
    "unit_normal",
    "wirtinger_gradient",
]
