"""Benchmark table: solver against analytic and direct oracles."""

import math
from typing import List, Optional, Sequence

import pandas as pd

from bench.catalog import BenchmarkCase, catalog
from bench.oracle import direct_oracle
from core.shooting import ShootingOptions, solve
from utils.error_handlers import BudgetExceeded, NoConvergence
from utils.logger import get_logger
from utils.performance_optimizer import performance_monitor
from utils.settings import AppConstants

logger = get_logger(__name__)


def benchmark_case(case: BenchmarkCase, opts: Optional[ShootingOptions] = None) -> dict:
    """One table row; timings go to the runtime log only."""
    opts = opts or ShootingOptions()
    p = case.problem

    performance_monitor.start_timer(f"bench.solve.{case.name}")
    try:
        result = solve(p, case.initial_guess, opts)
        converged, solver_cost = True, result.cost
    except NoConvergence as e:
        converged = False
        solver_cost = e.result.cost if e.result is not None else math.nan
        logger.warning("Benchmark case did not converge", case=case.name, reason=e.message)
    finally:
        performance_monitor.end_timer(f"bench.solve.{case.name}")

    oracle_cost = math.nan
    settings = case.oracle_settings
    if settings is not None:
        performance_monitor.start_timer(f"bench.oracle.{case.name}")
        try:
            oracle_cost = direct_oracle(p, settings.intervals, settings.grid_points, settings.time_grid).cost
        except BudgetExceeded as e:
            logger.warning("Oracle skipped", case=case.name, reason=e.message)
        finally:
            performance_monitor.end_timer(f"bench.oracle.{case.name}")

    analytic_cost = case.oracle.cost if case.oracle is not None else math.nan
    return {
        "case": case.name,
        "converged": converged,
        "solver_cost": solver_cost,
        "oracle_cost": oracle_cost,
        "analytic_cost": analytic_cost,
        "solver_gap": abs(solver_cost - analytic_cost),
        "oracle_gap": solver_cost - oracle_cost,
        "oracle_slack": case.tolerances.get("oracle_slack", math.nan),
    }


def run_benchmarks(cases: Optional[Sequence[BenchmarkCase]] = None,
                   opts: Optional[ShootingOptions] = None) -> pd.DataFrame:
    """
    Run every case (the full catalog by default) in catalog order.

    solver_gap is |solver - analytic|; oracle_gap is solver - oracle and
    should not exceed oracle_slack.
    """
    cases = list(cases) if cases is not None else catalog()
    rows: List[dict] = [benchmark_case(case, opts) for case in cases]
    frame = pd.DataFrame(rows, columns=AppConstants.BENCH_COLUMNS)
    logger.info("Benchmarks finished", cases=len(rows), converged=int(frame["converged"].sum()))
    return frame


def bench_passed(frame: pd.DataFrame) -> bool:
    """Every case converged and no solver cost exceeds its oracle by more than oracle_slack."""
    if frame.empty:
        return True
    unbounded = frame["oracle_gap"].isna() | frame["oracle_slack"].isna()
    within_slack = unbounded | (frame["oracle_gap"] <= frame["oracle_slack"])
    return bool((frame["converged"].astype(bool) & within_slack).all())


__all__ = ["bench_passed", "benchmark_case", "run_benchmarks"]
