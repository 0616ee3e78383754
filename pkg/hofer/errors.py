"""
Named errors raised by the hofer library.

FAIL verdicts (verify_map, hz_admissibility, certificates) are results, not
exceptions; everything here signals a violated precondition or a numerical
breakdown.
"""
from typing import Any, Optional


class HoferError(Exception):
    """Base error carrying a message and structured details"""

    def __init__(self, message: str, details: Optional[dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> dict[str, Any]:
        return {"error": type(self).__name__, "message": self.message, "details": self.details}


class ChartDegenerate(HoferError):
    """Point too close to the boundary of the requested affine chart"""


class SingularForm(HoferError):
    """Symplectic form matrix is numerically singular"""


class StepFailure(HoferError):
    """Integrator step size underflow"""


class NormalizationFailure(HoferError):
    """Per-time minimum of a Hamiltonian could not be located"""


class EndpointMismatch(HoferError):
    """Time-one maps of two Hamiltonians differ beyond tolerance"""


class DomainViolation(HoferError):
    """Input outside the domain of a map or model"""


class ContainmentViolation(HoferError):
    """Image of a map left its codomain"""


class InfeasibleContainment(HoferError):
    """A map family could not be built inside its target rectangles"""


class UnverifiedMap(HoferError):
    """A certificate was requested for a map without a passing verification"""


class MissingSide(HoferError):
    """Capacity of a Hamiltonian requested without certificates for both sides"""


class InsufficientPremises(HoferError):
    """Length-minimality certificate requested without the needed premises"""


class Unsupported(HoferError):
    """Operation not defined for this manifold kind"""


class ConfigError(HoferError):
    """Invalid run configuration"""
