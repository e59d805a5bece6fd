"""
Command-line surface: solve, verify, bench and list.

Exit status 0 on success, 1 when shooting does not converge (or a verify
suite fails), 2 on invalid input. Errors are printed to standard error as
one JSON object with a machine-readable code.
"""

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence, TextIO

import pandas as pd
from pydantic import ValidationError as PydanticValidationError

from bench.catalog import BenchmarkCase, case_from_document, case_names, catalog, get_case
from bench.runner import bench_passed, run_benchmarks
from bench.suites import run_suites
from core.shooting import (
    ShootingOptions,
    default_starts,
    solve,
    solve_multistart,
    verify_extremal,
)
from models.documents import ProblemDocument, RunConfig, ShootingReport
from models.problem import TimeMode
from utils.error_handlers import (
    ConfigurationError,
    ContactPmpError,
    ErrorContext,
    FileSystemError,
    NoConvergence,
    ValidationError,
    error_handler,
)
from utils.exporters import ResultExporter, dumps_report, frame_to_csv
from utils.logger import add_runtime_log, get_logger
from utils.performance_optimizer import performance_monitor
from utils.settings import AppConstants, integrator_config, output_config, validate_configuration
from utils.validators import ConfigValidator, ProblemValidator

logger = get_logger(__name__)

EXIT = AppConstants.EXIT_CODES


# -- parsing -----------------------------------------------------------

def _float_list(text: str) -> List[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="Output directory for data files and the runtime log")
    common.add_argument("--format", choices=AppConstants.OUTPUT_FORMATS, default="json",
                        help="Format of tables and of the report printed to stdout")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--tol", type=float, help="Residual tolerance (max norm)")
    solver.add_argument("--max-iter", type=int, help="Newton iterations per chart attempt")
    solver.add_argument("--step", type=float, help="RK4 step (max step for rk45)")
    solver.add_argument("--method", choices=("rk4", "rk45"), help="Integrator")
    solver.add_argument("--chart", choices=AppConstants.CHART_POLICIES, default="auto",
                        help="Chart policy for the initial costate")

    parser = argparse.ArgumentParser(
        prog="contact-pmp",
        description="Indirect shooting for optimal control on the projectivized cotangent bundle",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_solve = sub.add_parser("solve", parents=[common, solver], help="Solve one problem")
    p_solve.add_argument("--problem", required=True, help="Built-in problem name or path to a JSON document")
    p_solve.add_argument("--x0", type=_float_list, help="Initial state, e.g. 1,0")
    p_solve.add_argument("--t1", type=float, help="Terminal time (fixed mode) or initial guess (free mode)")
    p_solve.add_argument("--time-mode", choices=("free", "fixed"), help="Override the terminal time mode")
    p_solve.add_argument("--multistart", type=int, default=1, help="Number of seeded starts")
    p_solve.add_argument("--seed", type=int, default=0, help="Seed for multi-start costates")

    p_verify = sub.add_parser("verify", parents=[common], help="Run invariant suites")
    p_verify.add_argument("--suite", action="append", default=[],
                          help=f"Suite to run (repeatable): {', '.join(AppConstants.VERIFY_SUITES)}")
    p_verify.add_argument("--samples", type=int, help="Random instances per suite")
    p_verify.add_argument("--seed", type=int, default=0, help="Seed for random instances")

    sub.add_parser("bench", parents=[common, solver], help="Run the benchmark catalog against its oracles")
    sub.add_parser("list", parents=[common], help="List built-in problems")
    return parser


def parse_config(argv: Optional[Sequence[str]] = None) -> RunConfig:
    """Parse argv into a RunConfig; argparse exits with status 2 on malformed flags."""
    args = vars(build_parser().parse_args(argv))
    suites = []
    for item in args.pop("suite", []) or []:
        suites += [s for s in item.split(",") if s]
    args["suites"] = suites
    args = {k: v for k, v in args.items() if v is not None}
    try:
        return RunConfig(**args)
    except PydanticValidationError as e:
        first = e.errors()[0]
        raise ValidationError(first["msg"], field=".".join(str(x) for x in first["loc"]) or None)


# -- problem loading ---------------------------------------------------

def load_document(path: str) -> ProblemDocument:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except OSError as e:
        raise FileSystemError(str(e), file_path=path, original_exception=e)
    except json.JSONDecodeError as e:
        raise ValidationError(f"Invalid JSON: {e}", field="problem")
    try:
        return ProblemDocument.model_validate(data)
    except PydanticValidationError as e:
        first = e.errors()[0]
        raise ValidationError(first["msg"], field=".".join(str(x) for x in first["loc"]))


def load_case(config: RunConfig) -> BenchmarkCase:
    """Built-in case or JSON document, with --x0 / --t1 / --time-mode applied."""
    if config.problem in case_names():
        case = get_case(config.problem)
    else:
        case = case_from_document(load_document(config.problem))
        checked = ProblemValidator.validate_problem(case.problem)
        for warning in checked.warnings:
            logger.warning("Problem check", problem=case.problem.name, detail=warning)
        if not checked.is_valid:
            raise ValidationError(checked.get_error_summary(), field="problem")

    p, guess = case.problem, case.initial_guess
    oracle = case.oracle
    if config.x0 is not None:
        if len(config.x0) != p.n:
            raise ValidationError(f"--x0 needs {p.n} entries, got {len(config.x0)}", field="x0")
        if list(config.x0) != p.x0.tolist():
            oracle = None
        p = p.with_initial_state(config.x0)

    mode = config.time_mode or ("free" if p.time_mode.is_free else "fixed")
    if mode == "fixed":
        t1 = config.t1 if config.t1 is not None else p.time_mode.t1
        if t1 is None:
            raise ValidationError("Fixed terminal time needs --t1", field="t1")
        if p.time_mode.is_free or t1 != p.time_mode.t1:
            oracle = None
        p = p.with_time_mode(TimeMode.fixed(t1))
        guess = replace(guess, t1=None)
    else:
        if not p.time_mode.is_free:
            oracle = None
        p = p.with_time_mode(TimeMode.free())
        t1_guess = config.t1 if config.t1 is not None else (guess.t1 or p.t0 + 1.0)
        guess = replace(guess, t1=float(t1_guess))

    return replace(case, problem=p, initial_guess=guess, oracle=oracle)


def shooting_options(config: RunConfig, case: Optional[BenchmarkCase] = None) -> ShootingOptions:
    """Flags first, then the document's tolerances, then configured defaults."""
    doc_tol = case.document.tolerances if case is not None else None
    opts = ShootingOptions(chart=config.chart)
    for name in ("tol", "max_iter", "step"):
        value = getattr(config, name)
        if value is None and doc_tol is not None:
            value = getattr(doc_tol, name)
        if value is not None:
            setattr(opts, name, value)
    if config.method is not None:
        opts.method = config.method
    opts.__post_init__()
    return opts


# -- subcommands -------------------------------------------------------

def _emit(text: str, stream: TextIO) -> None:
    stream.write(text)
    stream.flush()


def _solve_summary(report: dict) -> pd.DataFrame:
    keys = ("problem", "converged", "classification", "iterations", "cost", "t1", "residual_norm")
    return pd.DataFrame([{k: report[k] for k in keys}], columns=list(keys))


def command_solve(config: RunConfig, exporter: ResultExporter, stdout: TextIO) -> int:
    case = load_case(config)
    p = case.problem
    opts = shooting_options(config, case)

    performance_monitor.start_timer(f"solve.{p.name}")
    try:
        if config.multistart > 1:
            starts = default_starts(p, case.initial_guess, config.multistart, config.seed)
            results = solve_multistart(p, starts, opts)
        else:
            results = [solve(p, case.initial_guess, opts)]
    except NoConvergence as e:
        if e.result is not None and config.out:
            exporter.write_report({**e.result.to_dict(), "problem": p.name, "error": e.to_dict()})
        raise
    finally:
        performance_monitor.end_timer(f"solve.{p.name}")

    best = results[0]
    diagnostics = verify_extremal(p, best)
    report = ShootingReport(
        schema_version=output_config.schema_version,
        problem=p.name,
        diagnostics=diagnostics,
        alternatives=[{**r.to_dict(), "start_index": r.start_index} for r in results[1:]],
        **best.to_dict(),
    ).model_dump(by_alias=True)

    if config.out:
        exporter.write_report(report)
        exporter.write_trajectory(best.trajectory)
    if config.format == "json":
        _emit(dumps_report(report), stdout)
    else:
        _emit(frame_to_csv(_solve_summary(report)), stdout)
    return EXIT["OK"]


def command_verify(config: RunConfig, exporter: ResultExporter, stdout: TextIO) -> int:
    results = run_suites(config.suites, config.samples, config.seed)
    rows = [r.to_dict() for r in results]
    frame = pd.DataFrame([{k: row[k] for k in ("name", "passed", "defect", "tolerance", "samples")}
                          for row in rows])
    if config.out:
        exporter.write_table(frame, "verify", "csv")
        exporter.write_report({"suites": rows}, "verify")
    if config.format == "json":
        _emit(dumps_report({"suites": rows}), stdout)
    else:
        _emit(frame_to_csv(frame), stdout)
    return EXIT["OK"] if all(r.passed for r in results) else EXIT["NO_CONVERGENCE"]


def command_bench(config: RunConfig, exporter: ResultExporter, stdout: TextIO) -> int:
    frame = run_benchmarks(catalog(), shooting_options(config))
    if config.out:
        exporter.write_bench(frame, config.format)
    if config.format == "json":
        _emit(dumps_report({"rows": frame.to_dict(orient="records"), "columns": list(frame.columns)}), stdout)
    else:
        _emit(frame_to_csv(frame), stdout)
    return EXIT["OK"] if bench_passed(frame) else EXIT["NO_CONVERGENCE"]


def command_list(config: RunConfig, exporter: ResultExporter, stdout: TextIO) -> int:
    rows = [case.summary() for case in catalog()]
    if config.format == "json":
        _emit(dumps_report({"problems": rows}), stdout)
    else:
        _emit(frame_to_csv(pd.DataFrame(rows)), stdout)
    return EXIT["OK"]


COMMANDS = {
    "solve": command_solve,
    "verify": command_verify,
    "bench": command_bench,
    "list": command_list,
}


def _report_error(error: ContactPmpError, stderr: TextIO) -> None:
    record = error_handler.handle_exception(error, ErrorContext(operation="cli"))
    stderr.write(json.dumps({"code": record["code"], "message": record["message"]}, sort_keys=True) + "\n")


def run(config: RunConfig, stdout: TextIO = None, stderr: TextIO = None) -> int:
    """Execute one subcommand and return its exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr

    problems = validate_configuration()
    if problems:
        _report_error(ConfigurationError("; ".join(problems)), stderr)
        return EXIT["INVALID_INPUT"]
    checked = ConfigValidator.validate_run_config(config, case_names())
    if not checked.is_valid:
        stderr.write(json.dumps({"code": ValidationError.code, "message": checked.get_error_summary()}) + "\n")
        return EXIT["INVALID_INPUT"]

    exporter = ResultExporter(config.out)
    runtime_handler = None
    if config.out:
        runtime_handler = add_runtime_log(str(Path(config.out) / output_config.runtime_log_file))

    try:
        return COMMANDS[config.subcommand](config, exporter, stdout)
    except NoConvergence as e:
        _report_error(e, stderr)
        return EXIT["NO_CONVERGENCE"]
    except ContactPmpError as e:
        _report_error(e, stderr)
        return EXIT["INVALID_INPUT"]
    finally:
        if runtime_handler is not None:
            runtime_handler.close()
            get_logger("runtime").logger.removeHandler(runtime_handler)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        config = parse_config(argv)
    except ValidationError as e:
        sys.stderr.write(json.dumps({"code": e.code, "message": e.message}) + "\n")
        return EXIT["INVALID_INPUT"]
    logger.debug("Running subcommand", subcommand=config.subcommand, method=integrator_config.method)
    return run(config)


__all__ = [
    "build_parser",
    "parse_config",
    "load_document",
    "load_case",
    "shooting_options",
    "run",
    "main",
]
