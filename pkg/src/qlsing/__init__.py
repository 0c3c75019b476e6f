"""Isolated boundary singularities of quasilinear equations with absorption."""

from ._validation import INFINITE, ProblemParams, is_infinite
from .exceptions import (
    Ambiguous,
    DegenerateFit,
    DomainError,
    EllipticityFailure,
    IllPosed,
    NoBracket,
    NonConvergence,
    ProjectionFailure,
    QLSingError,
)

__version__ = "0.1.0"

__all__ = [
    "INFINITE",
    "ProblemParams",
    "is_infinite",
    "Ambiguous",
    "DegenerateFit",
    "DomainError",
    "EllipticityFailure",
    "IllPosed",
    "NoBracket",
    "NonConvergence",
    "ProjectionFailure",
    "QLSingError",
]
