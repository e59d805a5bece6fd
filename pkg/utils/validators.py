"""
Validation utilities for problems and run configurations.

Checks here go beyond the constructors: they probe a problem's callables
at sample points and report every issue found instead of stopping at the
first one.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from core.differentiation import central_gradient, central_jacobian
from models.documents import RunConfig
from models.problem import BoxControlSet, FiniteControlSet, OcpProblem
from utils.logger import get_logger
from utils.settings import AppConstants

logger = get_logger(__name__)


@dataclass
class ValidationResult:
    """Result of a validation operation."""

    is_valid: bool = True
    errors: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    field_errors: Dict[str, List[str]] = field(default_factory=dict)

    def add_error(self, message: str, field: Optional[str] = None) -> None:
        """
        Add an error to the validation result.

        Args:
            message: Error message
            field: Optional field name for field-specific errors
        """
        self.errors.append(message)
        self.is_valid = False
        if field:
            self.field_errors.setdefault(field, []).append(message)

    def add_warning(self, message: str, field: Optional[str] = None) -> None:
        """Add a warning; warnings never invalidate the result."""
        self.warnings.append(message)
        if field:
            self.field_errors.setdefault(field, []).append(f"Warning: {message}")

    def get_error_summary(self) -> str:
        """Get a formatted summary of all errors."""
        if not self.errors:
            return "No errors"
        lines = ["Validation Errors:"]
        lines += [f"  {i}. {error}" for i, error in enumerate(self.errors, 1)]
        return "\n".join(lines)

    def get_field_errors(self, field: str) -> List[str]:
        return self.field_errors.get(field, [])


class ProblemValidator:
    """Probes an OcpProblem for non-finite evaluations and inconsistent derivatives."""

    JACOBIAN_RTOL = 1e-4

    @staticmethod
    def _probe_controls(p: OcpProblem, count: int, rng: np.random.Generator) -> np.ndarray:
        U = p.control_set
        if isinstance(U, FiniteControlSet):
            return U.points
        return rng.uniform(U.lo, U.hi, size=(count, U.m))

    @staticmethod
    def validate_problem(p: OcpProblem, probes: int = 5, seed: int = 0) -> ValidationResult:
        """
        Validate a problem definition.

        Args:
            p: Problem to check
            probes: Number of random (x, u) probe points
            seed: Seed for the probe points

        Returns:
            ValidationResult: errors for non-finite data, warnings for derivative mismatches
        """
        result = ValidationResult()
        rng = np.random.default_rng(seed)

        if not np.all(np.isfinite(p.x0)):
            result.add_error("Initial state must be finite", "x0")
        U = p.control_set
        if isinstance(U, BoxControlSet) and not (np.all(np.isfinite(U.lo)) and np.all(np.isfinite(U.hi))):
            result.add_error("Control box must be bounded", "control_set")
        if not 0 <= p.target.k <= p.n:
            result.add_error(f"Target codimension {p.target.k} outside [0, {p.n}]", "target")
        if not result.is_valid:
            return result

        xs = p.x0 + rng.standard_normal((probes, p.n))
        us = ProblemValidator._probe_controls(p, probes, rng)
        for x, u in zip(xs, us[np.arange(probes) % len(us)]):
            try:
                with np.errstate(all="ignore"):
                    f = p.f(x, u)
                    L = p.L(x, u)
            except (ArithmeticError, ValueError) as e:
                result.add_error(f"Evaluating f or L failed at x={x.tolist()}: {e}", "dynamics")
                continue
            if f.shape != (p.n,):
                result.add_error(f"f returned shape {f.shape}, expected ({p.n},)", "dynamics")
                continue
            if not (np.all(np.isfinite(f)) and np.isfinite(L)):
                result.add_error(f"Non-finite f or L at x={x.tolist()}, u={u.tolist()}", "dynamics")
                continue

            if p.dynamics_jacobian is not None:
                fd = central_jacobian(lambda z: p.f(z, u), x)
                gap = float(np.max(np.abs(fd - p.f_x(x, u))))
                if gap > ProblemValidator.JACOBIAN_RTOL * max(1.0, float(np.max(np.abs(fd)))):
                    result.add_warning(f"Supplied df/dx differs from finite differences by {gap:.2e}",
                                       "dynamics_jacobian")
            if p.cost_gradient is not None:
                fd = central_gradient(lambda z: p.L(z, u), x)
                gap = float(np.max(np.abs(fd - p.L_x(x, u))))
                if gap > ProblemValidator.JACOBIAN_RTOL * max(1.0, float(np.max(np.abs(fd)))):
                    result.add_warning(f"Supplied dL/dx differs from finite differences by {gap:.2e}",
                                       "cost_gradient")

            if p.target.k and not np.all(np.isfinite(p.target.value(x))):
                result.add_error(f"Non-finite target function at x={x.tolist()}", "target")
            if p.has_terminal_cost and not np.isfinite(p.K(x)):
                result.add_error(f"Non-finite terminal cost at x={x.tolist()}", "terminal_cost")

            if p.argmax is not None:
                nu = rng.standard_normal(p.n + 1)
                nu[0] = -abs(nu[0])
                u_star = np.atleast_1d(p.argmax(x, nu))
                if not U.contains(u_star):
                    result.add_error(f"Analytic maximizer left U: {u_star.tolist()}", "argmax")

        logger.debug("Problem validated", problem=p.name, errors=len(result.errors),
                     warnings=len(result.warnings))
        return result


class ConfigValidator:
    """Checks a RunConfig against the available problems and suites."""

    @staticmethod
    def validate_run_config(config: RunConfig, known_problems: Sequence[str]) -> ValidationResult:
        """
        Validate a run configuration.

        Args:
            config: Parsed configuration
            known_problems: Names of built-in problems

        Returns:
            ValidationResult: Validation result
        """
        result = ValidationResult()

        if config.problem is not None and config.problem not in known_problems:
            path = Path(config.problem)
            if path.suffix.lower() != ".json":
                result.add_error(f"Unknown problem '{config.problem}'; available: {', '.join(known_problems)}",
                                 "problem")
            elif not path.is_file():
                result.add_error(f"Problem file '{config.problem}' does not exist", "problem")

        unknown = [s for s in config.suites if s not in AppConstants.VERIFY_SUITES]
        if unknown:
            result.add_error(f"Unknown suite(s): {', '.join(unknown)}", "suite")

        for name in ("tol", "step", "t1"):
            value = getattr(config, name)
            if value is not None and not (np.isfinite(value) and value > 0):
                result.add_error(f"{name} must be positive and finite", name)

        if config.x0 is not None and not np.all(np.isfinite(config.x0)):
            result.add_error("x0 must be finite", "x0")
        if config.time_mode == "fixed" and config.t1 is None:
            result.add_warning("Fixed time mode without --t1 keeps the problem's terminal time", "t1")

        return result


__all__ = [
    "ValidationResult",
    "ProblemValidator",
    "ConfigValidator",
]
