"""Numerical workbench for length and Laplace spectra of conformally flat 2-tori."""

__version__ = "0.1.0"

from .errors import (
    NumericsError,
    ValidationError,
    WorkbenchError,
)
from .fourier import BivariateFunction, PeriodicFunction

__all__ = [
    "BivariateFunction",
    "NumericsError",
    "PeriodicFunction",
    "ValidationError",
    "WorkbenchError",
    "__version__",
]
