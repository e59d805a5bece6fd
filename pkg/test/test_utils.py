#!/usr/bin/env python3
"""
Tests for settings, error handling, validators, exporters, logging and the worker pool.
"""

import json
import logging
import threading

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError as PydanticValidationError

from conftest import make_problem
from models.documents import ProblemDocument, RunConfig
from utils.error_handlers import (
    BudgetExceeded,
    ErrorCategory,
    ErrorContext,
    ErrorHandler,
    FileSystemError,
    NoConvergence,
    ValidationError,
    ZeroCostate,
)
from utils.exporters import ResultExporter, dumps_report, frame_to_csv, to_jsonable
from utils.logger import add_runtime_log, get_logger, log_performance
from utils.performance_optimizer import PerformanceMonitor, parallel_map, thread_count
from utils.settings import AppConstants, output_config, validate_configuration
from utils.validators import ConfigValidator, ProblemValidator, ValidationResult


def test_default_configuration_is_valid():
    """Shipped defaults pass validation."""
    assert validate_configuration() == []
    assert AppConstants.EXIT_CODES == {"OK": 0, "NO_CONVERGENCE": 1, "INVALID_INPUT": 2}


def test_error_codes_and_records():
    """Every solver error carries a stable code and serializes its context."""
    error = ZeroCostate("all zero", context=ErrorContext(operation="from_vector", problem="p"))
    record = error.to_dict()
    assert record["code"] == "ZERO_COSTATE" and record["type"] == "ZeroCostate"
    assert record["context"]["operation"] == "from_vector"
    assert record["category"] == ErrorCategory.PROJECTIVE.value

    assert ValidationError("bad", field="x0").message == "Validation error for field 'x0': bad"
    assert BudgetExceeded("too many").code == "BUDGET_EXCEEDED"
    stalled = NoConvergence("stalled", residual_history=[1.0, 0.5])
    assert stalled.residual_history == [1.0, 0.5] and stalled.result is None


def test_error_handler_history():
    """Handled errors are recorded; plain exceptions are categorized by type."""
    handler = ErrorHandler(history_size=2)
    handler.handle_exception(ZeroDivisionError("x / 0"))
    handler.handle_exception(ValidationError("bad"), ErrorContext(operation="cli"))
    record = handler.handle_exception(FileNotFoundError("gone"))
    assert record["category"] == ErrorCategory.FILE_SYSTEM.value

    stats = handler.get_error_statistics()
    assert stats["total_errors"] == 2
    assert stats["by_category"] == {"validation": 1, "file_system": 1}
    assert stats["recent_errors"][0]["context"]["operation"] == "cli"


def test_validation_result():
    """Warnings never invalidate; errors are numbered in the summary."""
    result = ValidationResult()
    result.add_warning("loose", "t1")
    assert result.is_valid
    result.add_error("missing", "problem")
    assert not result.is_valid
    assert result.get_error_summary() == "Validation Errors:\n  1. missing"
    assert result.get_field_errors("t1") == ["Warning: loose"]


def test_problem_validator(lq_case):
    """Non-finite evaluations are errors, inconsistent Jacobians are warnings."""
    assert ProblemValidator.validate_problem(lq_case.problem).is_valid

    broken = make_problem(lambda x, u: np.full(1, np.nan), lambda x, u: 0.0)
    result = ProblemValidator.validate_problem(broken)
    assert not result.is_valid and result.get_field_errors("dynamics")

    wrong = make_problem(lambda x, u: 2.0 * np.asarray(x, dtype=float), lambda x, u: 0.0,
                         dynamics_jacobian=lambda x, u: np.eye(1))
    result = ProblemValidator.validate_problem(wrong)
    assert result.is_valid and result.get_field_errors("dynamics_jacobian")


def test_config_validator(tmp_path):
    """Unknown problems, missing files and unknown suites are reported."""
    known = ["lq_terminal_cost"]
    ok = RunConfig(subcommand="solve", problem="lq_terminal_cost")
    assert ConfigValidator.validate_run_config(ok, known).is_valid

    assert not ConfigValidator.validate_run_config(RunConfig(subcommand="solve", problem="nope"), known).is_valid
    missing = RunConfig(subcommand="solve", problem=str(tmp_path / "p.json"))
    assert ConfigValidator.validate_run_config(missing, known).get_field_errors("problem")
    suites = RunConfig(subcommand="verify", suites=["pairing", "fourier"])
    assert ConfigValidator.validate_run_config(suites, known).get_field_errors("suite")
    fixed = RunConfig(subcommand="solve", problem="lq_terminal_cost", time_mode="fixed")
    checked = ConfigValidator.validate_run_config(fixed, known)
    assert checked.is_valid and checked.warnings


def test_documents_validate_input():
    """Pydantic rejects malformed documents and configurations."""
    with pytest.raises(PydanticValidationError):
        ProblemDocument.model_validate({"name": "has space", "dynamics": "double_integrator",
                                        "control_set": {"box": {"lo": [-1.0], "hi": [1.0]}}, "x0": [1.0, 0.0]})
    with pytest.raises(PydanticValidationError):
        RunConfig(subcommand="solve")
    with pytest.raises(PydanticValidationError):
        RunConfig(subcommand="verify", samples=0)


def test_to_jsonable_and_reports():
    """numpy values unwrap, non-finite floats become null, keys are sorted."""
    data = to_jsonable({"a": np.float64(np.nan), "b": np.arange(2), "c": (np.bool_(True), np.int64(3))})
    assert data == {"a": None, "b": [0, 1], "c": [True, 3]}

    text = dumps_report({"z": 1.0, "a": float("inf")})
    assert text.endswith("\n")
    payload = json.loads(text)
    assert list(payload) == ["a", "schema", "z"]
    assert payload["a"] is None and payload["schema"] == output_config.schema_version


def test_result_exporter(tmp_path):
    """Reports and tables land in the output directory; no directory is an error."""
    exporter = ResultExporter(tmp_path / "out")
    path = exporter.write_report({"cost": 0.25})
    assert path.name == "report.json"
    assert json.loads(path.read_text())["cost"] == 0.25

    frame = pd.DataFrame([{"case": "a", "converged": True, "solver_cost": 1.0 / 3.0}])
    bench = exporter.write_bench(frame, "csv")
    lines = bench.read_text().splitlines()
    assert lines[0] == ",".join(AppConstants.BENCH_COLUMNS)
    assert lines[1].startswith("a,True,0.333333333333,")

    bench_json = exporter.write_bench(frame, "json")
    assert json.loads(bench_json.read_text())["columns"] == AppConstants.BENCH_COLUMNS

    assert frame_to_csv(pd.DataFrame({"x": [0.1]})) == "x\n0.1\n"
    with pytest.raises(FileSystemError):
        ResultExporter().write_report({})


def test_runtime_log_receives_timings(tmp_path):
    """Timers write to the runtime log only."""
    path = tmp_path / "runtimes.log"
    handler = add_runtime_log(str(path))
    try:
        monitor = PerformanceMonitor()
        monitor.start_timer("unit")
        assert monitor.end_timer("unit") >= 0.0
        assert monitor.end_timer("never_started") == 0.0
        assert "unit" in monitor.metrics
        monitor.clear_metrics()
        assert not monitor.metrics
    finally:
        handler.close()
        logging.getLogger("runtime").removeHandler(handler)
    assert "unit took" in path.read_text()


def test_log_performance_passes_results_through():
    """The timing decorator is transparent to return values and exceptions."""
    @log_performance("unit.square")
    def square(x):
        return x * x

    @log_performance("unit.fail")
    def fail():
        raise ValidationError("nope")

    assert square(3) == 9
    with pytest.raises(ValidationError):
        fail()
    get_logger("unit").info("structured", value=1)


def test_parallel_map_preserves_order():
    """Results come back in input order regardless of worker count."""
    items = list(range(20))
    assert parallel_map(lambda i: i * i, items) == [i * i for i in items]
    assert parallel_map(lambda i: i, items, max_workers=1) == items
    assert parallel_map(lambda i: i, []) == []
    assert thread_count(1) == 1 and thread_count() >= 1


def test_timers_are_per_thread():
    """The same operation timed on two threads keeps two start times."""
    monitor = PerformanceMonitor()
    barrier = threading.Barrier(2)
    durations = []

    def timed():
        monitor.start_timer("shared")
        barrier.wait()
        durations.append(monitor.end_timer("shared"))

    workers = [threading.Thread(target=timed) for _ in range(2)]
    for worker in workers:
        worker.start()
    for worker in workers:
        worker.join()
    assert len(durations) == 2 and all(d > 0.0 for d in durations)
    assert not monitor.start_times
