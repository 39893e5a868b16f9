"""Simulation toolkit for dynamically decoupled two-spin singlet storage."""
from __future__ import annotations

from .errors import (
    DegenerateStateError,
    DomainError,
    IntegratorError,
    OverlapError,
    QuadratureError,
    SequenceSyntaxError,
    SingularFitError,
)

__all__ = [
    "DegenerateStateError",
    "DomainError",
    "IntegratorError",
    "OverlapError",
    "QuadratureError",
    "SequenceSyntaxError",
    "SingularFitError",
]
__version__ = "0.1.0"
