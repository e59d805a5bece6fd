"""
Error handling utilities for the contact-geometric PMP solver.

This module provides the exception hierarchy used by every numerical module,
machine-readable error codes for the command line, and a centralized
handler that logs failures with category and severity.
"""

from typing import Any, Optional, Dict, List
from dataclasses import dataclass
from enum import Enum

from utils.logger import get_logger

logger = get_logger(__name__)


class ErrorSeverity(Enum):
    """Error severity levels."""

    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"


class ErrorCategory(Enum):
    """Error categories for better classification."""

    PROJECTIVE = "projective"
    EVALUATION = "evaluation"
    INTEGRATION = "integration"
    SHOOTING = "shooting"
    BENCHMARK = "benchmark"
    VALIDATION = "validation"
    CONFIGURATION = "configuration"
    FILE_SYSTEM = "file_system"
    UNKNOWN = "unknown"


@dataclass
class ErrorContext:
    """Context information for an error."""

    operation: Optional[str] = None
    problem: Optional[str] = None
    time: Optional[float] = None
    additional_data: Optional[Dict[str, Any]] = None

    def to_dict(self) -> Dict[str, Any]:
        """Convert error context to dictionary."""
        return {
            'operation': self.operation,
            'problem': self.problem,
            'time': self.time,
            'additional_data': self.additional_data or {}
        }


class ContactPmpError(Exception):
    """Base exception for the solver."""

    code = "UNKNOWN"
    default_category = ErrorCategory.UNKNOWN
    default_severity = ErrorSeverity.MEDIUM

    def __init__(
        self,
        message: str,
        category: Optional[ErrorCategory] = None,
        severity: Optional[ErrorSeverity] = None,
        context: Optional[ErrorContext] = None,
        original_exception: Optional[Exception] = None
    ):
        """
        Initialize solver exception.

        Args:
            message: Human-readable error message
            category: Error category for classification
            severity: Error severity level
            context: Additional context information
            original_exception: The original exception if this is a wrapper
        """
        super().__init__(message)
        self.message = message
        self.category = category or self.default_category
        self.severity = severity or self.default_severity
        self.context = context or ErrorContext()
        self.original_exception = original_exception

    def to_dict(self) -> Dict[str, Any]:
        """Convert exception to dictionary for logging and reports."""
        return {
            'type': self.__class__.__name__,
            'code': self.code,
            'message': self.message,
            'category': self.category.value,
            'severity': self.severity.value,
            'context': self.context.to_dict(),
            'original_exception': str(self.original_exception) if self.original_exception else None
        }


class ZeroCostate(ContactPmpError):
    """The zero covector has no projective class."""

    code = "ZERO_COSTATE"
    default_category = ErrorCategory.PROJECTIVE


class ChartSingularity(ContactPmpError):
    """A point lies outside the requested chart, or outside every chart."""

    code = "CHART_SINGULARITY"
    default_category = ErrorCategory.PROJECTIVE


class DerivativeFailure(ContactPmpError):
    """A partial-derivative evaluator failed or returned non-finite values."""

    code = "DERIVATIVE_FAILURE"
    default_category = ErrorCategory.EVALUATION


class ControlOutOfSet(ContactPmpError):
    """A control value does not belong to the admissible set U."""

    code = "CONTROL_OUT_OF_SET"
    default_category = ErrorCategory.EVALUATION
    default_severity = ErrorSeverity.LOW


class EvaluationFailure(ContactPmpError):
    """Problem callables returned non-finite values."""

    code = "EVALUATION_FAILURE"
    default_category = ErrorCategory.EVALUATION


class StepFailure(ContactPmpError):
    """An integration step failed (non-finite state or step-size underflow)."""

    code = "STEP_FAILURE"
    default_category = ErrorCategory.INTEGRATION


class GridMismatch(ContactPmpError):
    """Two sampled trajectories do not share a time grid."""

    code = "GRID_MISMATCH"
    default_category = ErrorCategory.INTEGRATION
    default_severity = ErrorSeverity.LOW


class RankDeficient(ContactPmpError):
    """The target-constraint Jacobian lost full row rank."""

    code = "RANK_DEFICIENT"
    default_category = ErrorCategory.SHOOTING


class InvalidUnknowns(ContactPmpError):
    """Shooting unknowns violate their preconditions (e.g. t1 <= t0)."""

    code = "INVALID_UNKNOWNS"
    default_category = ErrorCategory.SHOOTING
    default_severity = ErrorSeverity.LOW


class NoConvergence(ContactPmpError):
    """Newton shooting did not reach the residual tolerance."""

    code = "NO_CONVERGENCE"
    default_category = ErrorCategory.SHOOTING
    default_severity = ErrorSeverity.HIGH

    def __init__(self, message: str, best_iterate: Any = None,
                 residual_history: Optional[List[float]] = None,
                 result: Any = None, context: Optional[ErrorContext] = None):
        super().__init__(message, context=context)
        self.best_iterate = best_iterate
        self.residual_history = list(residual_history or [])
        self.result = result


class BudgetExceeded(ContactPmpError):
    """The exhaustive oracle would enumerate more schedules than allowed."""

    code = "BUDGET_EXCEEDED"
    default_category = ErrorCategory.BENCHMARK


class ValidationError(ContactPmpError):
    """Invalid user input (problem document, flags, dimensions)."""

    code = "INVALID_INPUT"
    default_category = ErrorCategory.VALIDATION
    default_severity = ErrorSeverity.LOW

    def __init__(self, message: str, field: Optional[str] = None, context: Optional[ErrorContext] = None):
        if field:
            message = f"Validation error for field '{field}': {message}"
        super().__init__(message, context=context)
        self.field = field


class ConfigurationError(ContactPmpError):
    """Configuration-related errors."""

    code = "CONFIGURATION"
    default_category = ErrorCategory.CONFIGURATION
    default_severity = ErrorSeverity.CRITICAL


class FileSystemError(ContactPmpError):
    """File system related errors."""

    code = "FILE_SYSTEM"
    default_category = ErrorCategory.FILE_SYSTEM

    def __init__(self, message: str, file_path: Optional[str] = None, context: Optional[ErrorContext] = None,
                 original_exception: Optional[Exception] = None):
        if file_path:
            message = f"File system error for '{file_path}': {message}"
        super().__init__(message, context=context, original_exception=original_exception)
        self.file_path = file_path


class ErrorHandler:
    """Centralized error handling class."""

    def __init__(self, history_size: int = 100):
        """Initialize error handler."""
        self.logger = get_logger(__name__)
        self._history_size = history_size
        self._error_history: List[Dict[str, Any]] = []

    def handle_exception(self, exception: Exception, context: Optional[ErrorContext] = None) -> Dict[str, Any]:
        """
        Log an exception with its classification and remember it.

        Args:
            exception: The exception to handle
            context: Additional context information

        Returns:
            Dict[str, Any]: The error record that was logged
        """
        if isinstance(exception, ContactPmpError):
            error_dict = exception.to_dict()
            if context:
                error_dict['context'].update({k: v for k, v in context.to_dict().items() if v})
        else:
            wrapped = ContactPmpError(
                message=str(exception),
                category=self._categorize_exception(exception),
                context=context,
                original_exception=exception
            )
            error_dict = wrapped.to_dict()

        self.logger.error(
            f"Exception handled: {error_dict['type']} - {error_dict['message']}",
            code=error_dict['code'],
            category=error_dict['category'],
            severity=error_dict['severity'],
        )

        self._error_history.append(error_dict)
        if len(self._error_history) > self._history_size:
            self._error_history.pop(0)

        return error_dict

    def _categorize_exception(self, exception: Exception) -> ErrorCategory:
        """Categorize a standard exception."""
        category_mapping = {
            'FloatingPointError': ErrorCategory.EVALUATION,
            'OverflowError': ErrorCategory.EVALUATION,
            'ZeroDivisionError': ErrorCategory.EVALUATION,
            'LinAlgError': ErrorCategory.SHOOTING,
            'FileNotFoundError': ErrorCategory.FILE_SYSTEM,
            'PermissionError': ErrorCategory.FILE_SYSTEM,
            'ValueError': ErrorCategory.VALIDATION,
            'TypeError': ErrorCategory.VALIDATION,
            'KeyError': ErrorCategory.CONFIGURATION,
        }
        return category_mapping.get(type(exception).__name__, ErrorCategory.UNKNOWN)

    def get_error_statistics(self) -> Dict[str, Any]:
        """Get error statistics for monitoring."""
        by_category: Dict[str, int] = {}
        for error in self._error_history:
            category = error.get('category', 'unknown')
            by_category[category] = by_category.get(category, 0) + 1
        return {
            'total_errors': len(self._error_history),
            'by_category': by_category,
            'recent_errors': self._error_history[-10:]
        }


# Global error handler instance
error_handler = ErrorHandler()


__all__ = [
    'ContactPmpError',
    'ZeroCostate',
    'ChartSingularity',
    'DerivativeFailure',
    'ControlOutOfSet',
    'EvaluationFailure',
    'StepFailure',
    'GridMismatch',
    'RankDeficient',
    'InvalidUnknowns',
    'NoConvergence',
    'BudgetExceeded',
    'ValidationError',
    'ConfigurationError',
    'FileSystemError',
    'ErrorHandler',
    'ErrorContext',
    'ErrorSeverity',
    'ErrorCategory',
    'error_handler'
]
