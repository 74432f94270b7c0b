"""
Exception hierarchy for the application.

Every failure raised by the numerical services derives from RegretLensError so
the command line and the HTTP layer can translate it into a single error record.
"""

from typing import Any, Dict, Optional


class RegretLensError(Exception):
    """
    Base class for all application errors.

    Attributes:
        message (str): Human readable description.
        detail (Dict[str, Any]): Structured context serialized into error records.
    """

    def __init__(self, message: str, detail: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.detail = detail or {}

    @property
    def kind(self) -> str:
        return type(self).__name__


class NoSignChange(RegretLensError):
    """Raised when a root bracket does not straddle zero."""


class NonFinite(RegretLensError):
    """Raised when a function evaluates to NaN or infinity."""


class ToleranceNotMet(RegretLensError):
    """Raised when an iterative method exhausts its budget before converging."""


class DomainError(RegretLensError, ValueError):
    """Raised when an argument lies outside the domain of an operation."""


class SamplingBudgetExhausted(RegretLensError):
    """Raised when rejection sampling runs out of attempts."""


class CheckFailed(RegretLensError):
    """Raised when an asserted numerical check does not hold."""


class SaddleViolation(CheckFailed):
    """
    Raised when a saddle verification probe beats the optimal value.

    Attributes:
        probe (Dict[str, Any]): Description of the offending probe.
        report (Any): The partially filled SaddleReport.
    """

    def __init__(self, message: str, probe: Dict[str, Any], report: Any = None):
        super().__init__(message, detail={"probe": probe})
        self.probe = probe
        self.report = report
