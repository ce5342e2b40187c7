"""
Sphere p-curvature - Error Types

Every failure raised by the library derives from PcurvError and carries the
CLI exit code it maps to. Validation problems are ValueErrors, numerical
breakdowns are ArithmeticErrors, so callers can still catch builtins.
"""

from typing import Any, Dict, Optional


EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2


class PcurvError(Exception):
    """Base class for sphere-pcurv errors."""

    exit_code = EXIT_VALIDATION

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_record(self) -> Dict[str, Any]:
        """Machine-readable error record (written as one JSON line on stderr)."""
        return {
            "error": type(self).__name__,
            "message": self.message,
            "exit_code": self.exit_code,
            "details": self.details,
        }


# =============================================================================
# Validation errors (exit 1)
# =============================================================================

class ValidationError(PcurvError, ValueError):
    """Invalid input: non-unit vectors, bad ranges, unknown families."""


class RangeError(ValidationError):
    """A parameter lies outside its admissible interval."""


class ChartDomainError(ValidationError):
    """Point outside the punctured-sphere chart (the south pole)."""


class ScheduleError(ValidationError):
    """Empty, non-monotone or unsatisfiable experiment schedule."""


# =============================================================================
# Numerical errors (exit 2)
# =============================================================================

class NumericalError(PcurvError, ArithmeticError):
    """A numerical construction failed."""

    exit_code = EXIT_NUMERICAL


class InscriptionError(NumericalError):
    """Consecutive inscription samples are antipodal."""


class MarchingError(NumericalError):
    """Equilateral marching could not find the next chord."""


class SingularAngleError(NumericalError):
    """Turning angle at (or numerically at) pi."""


class NonSmoothPointError(NumericalError):
    """Curvature requested at, or integrated across, a corner."""


class DegenerateParametrizationError(NumericalError):
    """Vanishing speed detected in a parametrization."""


class BendConstructionError(NumericalError):
    """Internal consistency failure while gluing bends."""
