"""Error taxonomy shared by all modules.

Two families matter to callers: ``ValidationError`` (bad or inconsistent
inputs; CLI exit code 2) and ``NumericsError`` (a numerical procedure failed
to converge or certify; CLI exit code 3).  Each carries a stable ``code``
string used in diagnostics and tests.
"""

from __future__ import annotations


class WorkbenchError(Exception):
    code = "ERROR"


class ValidationError(WorkbenchError, ValueError):
    code = "VALIDATION"


class NumericsError(WorkbenchError, RuntimeError):
    code = "NUMERICS"


class ConstantFunctionError(ValidationError):
    """An operation needs a nonconstant profile."""

    code = "CONSTANT_FUNCTION"


class ConstantProfileError(ValidationError):
    """Oscillatory enumeration requested for a constant transverse profile."""

    code = "CONSTANT_PROFILE"


class InteriorZeroError(ValidationError):
    """Quadrature integrand vanishes strictly inside the interval."""

    code = "INTERIOR_ZERO"


class TurningPointError(ValidationError):
    """A rotational-mode trajectory request ran into a turning point."""

    code = "TURNING_POINT_HIT"


class OverlappingRiversError(ValidationError):
    """Two-rivers supports intersect at the documented support tolerance."""

    code = "OVERLAPPING_RIVERS"


class ResolutionTooLowError(ValidationError):
    """Grid too coarse for the metric bandwidth (aliasing guard)."""

    code = "RESOLUTION_TOO_LOW"


class ResolutionDishonestError(ValidationError):
    """Smoothing window claims features finer than the eigenvalue band."""

    code = "RESOLUTION_DISHONEST"


class BandTooShortError(ValidationError):
    """Too few frequency shells for a growth-exponent fit."""

    code = "BAND_TOO_SHORT"


class NoTorusError(ValidationError):
    """The requested homology class carries no rational torus."""

    code = "NO_TORUS"


class NoConvergenceError(NumericsError):
    code = "NO_CONVERGENCE"


class StepTooLargeError(NumericsError):
    """Integrator energy drift exceeded tolerance; shrink dt."""

    code = "STEP_TOO_LARGE"


class TailTooLargeError(NumericsError):
    """Spectral truncation tail too large for the requested quantity."""

    code = "TAIL_TOO_LARGE"


class UnmatchedPeakError(NumericsError):
    """A wave-trace peak has no length-spectrum partner (Poisson containment)."""

    code = "UNMATCHED_PEAK"

    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


class MissingLengthError(NumericsError):
    """A minimal rotational length left no wave-trace peak although the
    noncoincidence condition guarantees its singularity survives."""

    code = "MISSING_MINIMAL_LENGTH"

    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report
