"""Numerical laboratory for the boundary behavior of convex solutions of
det D^2 u = f on convex planar domains: discrete Dirichlet solves, section
geometry, derivative bounds, barrier certificates and pointwise regularity
measurements."""

from .domain import (
    BoundaryFunction,
    ConvexDomain,
    ProblemSpec,
    check_hypothesis_case,
    convex_envelope,
    make_domain,
    quadratic_separation,
)
from .solver import (
    Field,
    Grid,
    alexandrov_check,
    comparison_check,
    discretize,
    exact_oracle,
    field_from_callable,
    solve_dirichlet,
    spec_from_oracle,
)

__all__ = [
    "BoundaryFunction",
    "ConvexDomain",
    "ProblemSpec",
    "check_hypothesis_case",
    "convex_envelope",
    "make_domain",
    "quadratic_separation",
    "Field",
    "Grid",
    "alexandrov_check",
    "comparison_check",
    "discretize",
    "exact_oracle",
    "field_from_callable",
    "solve_dirichlet",
    "spec_from_oracle",
]

__version__ = "0.1.0"
