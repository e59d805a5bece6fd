"""
Configuration settings for the contact-geometric PMP solver.

This module contains all configuration constants and settings used throughout
the solver, providing a centralized location for tolerances, integrator
defaults and output conventions. Values can be overridden from the
environment (or a `.env` file) using the CONTACT_PMP_* variables.
"""

import os
from dataclasses import dataclass
from typing import List

import numpy as np
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    return float(raw) if raw not in (None, "") else default


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    return int(raw) if raw not in (None, "") else default


@dataclass
class ChartConfig:
    """Projective chart atlas thresholds."""

    # Relative band |nu0| <= eps0 * max|nu_i| classifies a costate as abnormal
    eps0: float = _env_float("CONTACT_PMP_EPS0", 1e-9)

    # A chart coordinate this small (relative) is treated as outside the chart
    singularity_tol: float = 1e-14

    # Absolute floor below which a covector counts as zero
    zero_tol: float = 1e-300

    # Abnormal chart: move the pivot once another entry dominates by this ratio
    pivot_switch_ratio: float = 10.0

    # Abnormal -> normal re-entry needs |nu0| > eps0 * hysteresis * max|nu_i|
    normal_hysteresis: float = 10.0

    # |alpha| beyond this bound means the flow left the abnormal chart
    alpha_bound: float = 1e8


@dataclass
class IntegratorConfig:
    """Time integration defaults."""

    method: str = os.getenv("CONTACT_PMP_METHOD", "rk4")
    step: float = _env_float("CONTACT_PMP_STEP", 1e-3)

    # Adaptive RK45
    rtol: float = 1e-8
    atol: float = 1e-10
    min_step: float = 1e-14

    # Bang-bang switch location by bisection
    switch_time_tol: float = 1e-10
    switch_jump_fraction: float = 0.25

    # Central finite differences: h = cbrt(eps) * max(1, |coordinate|)
    fd_step: float = float(np.cbrt(np.finfo(float).eps))


@dataclass
class MaximizerConfig:
    """Pointwise maximization of the control Hamiltonian over U."""

    grid_points: int = 33
    refinement_rounds: int = 3
    shrink_factor: float = 0.25

    # Per-axis grid used when certifying the maximum principle
    verification_points: int = 33


@dataclass
class ShootingConfig:
    """Damped Newton shooting defaults."""

    tol: float = _env_float("CONTACT_PMP_TOL", 1e-8)
    max_iter: int = _env_int("CONTACT_PMP_MAX_ITER", 50)
    max_halvings: int = 30
    fd_rel_step: float = 1e-6
    retry_abnormal: bool = True
    armijo: float = 1e-4


@dataclass
class OracleConfig:
    """Brute-force direct oracle settings."""

    penalty: float = 1e4
    budget: int = 10_000_000
    substeps: int = 4
    chunk_size: int = 65_536


@dataclass
class PerformanceConfig:
    """Parallelism caps."""

    max_threads: int = _env_int("CONTACT_PMP_THREADS", min(8, os.cpu_count() or 1))
    memory_monitoring_enabled: bool = os.getenv("CONTACT_PMP_MEMORY", "False").lower() == "true"


@dataclass
class LoggingConfig:
    """Logging configuration settings."""

    # Log levels
    log_level: str = os.getenv("CONTACT_PMP_LOG_LEVEL", "WARNING")
    debug_mode: bool = os.getenv("DEBUG", "False").lower() == "true"

    # Log formatting
    log_format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    date_format: str = "%Y-%m-%d %H:%M:%S"

    # File logging
    log_to_file: bool = os.getenv("CONTACT_PMP_LOG_FILE", "") != ""
    log_file_path: str = os.getenv("CONTACT_PMP_LOG_FILE", "logs/contact_pmp.log")
    log_max_bytes: int = 10 * 1024 * 1024  # 10MB
    log_backup_count: int = 5

    log_performance: bool = debug_mode


@dataclass
class OutputConfig:
    """Report and CSV conventions."""

    schema_version: str = "1"
    float_format: str = "%.12g"
    trajectory_file: str = "trajectory.csv"
    report_file: str = "report"
    bench_file: str = "bench"
    runtime_log_file: str = "runtimes.log"


# Global configuration instances
chart_config = ChartConfig()
integrator_config = IntegratorConfig()
maximizer_config = MaximizerConfig()
shooting_config = ShootingConfig()
oracle_config = OracleConfig()
performance_config = PerformanceConfig()
logging_config = LoggingConfig()
output_config = OutputConfig()


class AppConstants:
    """Application-wide constants."""

    SUBCOMMANDS = ("solve", "verify", "bench", "list")

    EXIT_CODES = {
        "OK": 0,
        "NO_CONVERGENCE": 1,
        "INVALID_INPUT": 2,
    }

    CHART_POLICIES = ("normal", "abnormal", "auto")
    OUTPUT_FORMATS = ("csv", "json")
    VERIFY_SUITES = ("homogeneity", "pairing", "charts", "contact_symplectic", "psi_k")

    BENCH_COLUMNS = [
        "case",
        "converged",
        "solver_cost",
        "oracle_cost",
        "analytic_cost",
        "solver_gap",
        "oracle_gap",
        "oracle_slack",
    ]


def validate_configuration() -> List[str]:
    """
    Validate the current configuration settings.

    Returns:
        List[str]: List of validation errors, empty if configuration is valid
    """
    errors = []

    for label, value in (
        ("eps0", chart_config.eps0),
        ("integrator step", integrator_config.step),
        ("rtol", integrator_config.rtol),
        ("atol", integrator_config.atol),
        ("switch time tolerance", integrator_config.switch_time_tol),
        ("shooting tolerance", shooting_config.tol),
        ("newton difference step", shooting_config.fd_rel_step),
        ("oracle penalty", oracle_config.penalty),
    ):
        if not value > 0:
            errors.append(f"{label} must be positive, got {value}")

    if integrator_config.method not in ("rk4", "rk45"):
        errors.append(f"Unknown integrator method '{integrator_config.method}'")
    if maximizer_config.grid_points < 2:
        errors.append("Maximizer grid needs at least 2 points per axis")
    if not 0.0 < maximizer_config.shrink_factor < 1.0:
        errors.append("Maximizer shrink factor must lie in (0, 1)")
    if shooting_config.max_iter < 1:
        errors.append("Shooting needs at least one Newton iteration")
    if performance_config.max_threads < 1:
        errors.append("CONTACT_PMP_THREADS must be at least 1")

    return errors


# Export all configurations for easy import
__all__ = [
    "chart_config",
    "integrator_config",
    "maximizer_config",
    "shooting_config",
    "oracle_config",
    "performance_config",
    "logging_config",
    "output_config",
    "AppConstants",
    "validate_configuration",
]
