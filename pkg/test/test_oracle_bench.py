#!/usr/bin/env python3
"""
Tests for the benchmark catalog, the direct oracle, the benchmark table and the invariant suites.
"""

import numpy as np
import pytest

from bench.catalog import case_names, catalog, get_case
from bench.oracle import control_values, direct_oracle
from bench.runner import bench_passed, run_benchmarks
from bench.suites import charts_suite, psi_k_suite, run_suites
from conftest import make_problem
from core.propagation import integrate_extended
from core.shooting import ShootingOptions
from models.problem import FiniteControlSet, TimeMode
from models.trajectory import ControlSignal
from utils.error_handlers import BudgetExceeded, ValidationError
from utils.settings import AppConstants


def test_catalog_names_and_summaries():
    """Four built-in cases in fixed order, three with closed-form optima."""
    assert case_names() == ["double_integrator_min_time", "min_time_to_line", "lq_terminal_cost", "linear_pairing"]
    cases = catalog()
    assert [c.name for c in cases] == case_names()
    assert sum(c.oracle is not None for c in cases) == 3

    summary = cases[0].summary()
    assert summary["n"] == 2 and summary["time_mode"] == "free" and summary["analytic"]
    assert cases[2].summary()["terminal_cost"]

    with pytest.raises(ValidationError):
        get_case("brachistochrone")


def test_analytic_oracle_values():
    """Closed-form costs and unknown layouts."""
    di = get_case("double_integrator_min_time")
    assert di.oracle.cost == 2.0 and di.oracle.switch_times == (1.0,)
    z = di.oracle.unknowns(di.problem)
    assert z.t1 == 2.0 and z.c.size == 2

    lq = get_case("lq_terminal_cost")
    assert lq.oracle.unknowns(lq.problem).t1 is None
    assert lq.oracle.to_dict()["costate0"] == [-0.5]


def test_control_values_order():
    """Per-axis grids in lexicographic order; finite sets as listed."""
    p = make_problem(lambda x, u: np.asarray(u, dtype=float), lambda x, u: 0.0)
    np.testing.assert_allclose(control_values(p, 3), [[-1.0], [0.0], [1.0]])
    finite = make_problem(lambda x, u: np.asarray(u, dtype=float), lambda x, u: 0.0,
                          control_set=FiniteControlSet([[2.0], [-2.0]]))
    np.testing.assert_allclose(control_values(finite, 99), [[2.0], [-2.0]])
    with pytest.raises(ValidationError):
        control_values(p, 0)


def test_oracle_zero_cost_problem():
    """L = 0 and K = 0 without a target: every schedule costs zero."""
    p = make_problem(lambda x, u: np.asarray(u, dtype=float), lambda x, u: 0.0)
    result = direct_oracle(p, 2, 3)
    assert result.cost == 0.0
    assert result.indices == (0, 0)
    assert result.evaluated == 9


def test_oracle_lq_case():
    """The oracle picks the constant schedule u = -0.5 with cost 0.25."""
    case = get_case("lq_terminal_cost")
    settings = case.oracle_settings
    result = direct_oracle(case.problem, settings.intervals, settings.grid_points, settings.time_grid)
    assert 0.25 - 1e-9 <= result.cost <= 0.25 + case.tolerances["oracle_slack"]
    np.testing.assert_allclose(result.controls, np.full((4, 1), -0.5), atol=1e-12)


def test_oracle_double_integrator():
    """Bang-bang schedule (-1, -1, 1, 1) reaches the origin at t1 = 2."""
    case = get_case("double_integrator_min_time")
    settings = case.oracle_settings
    result = direct_oracle(case.problem, settings.intervals, settings.grid_points, settings.time_grid)
    assert result.t1 == pytest.approx(2.0)
    assert result.cost == pytest.approx(2.0, abs=1e-9)
    np.testing.assert_allclose(result.controls[:, 0], [-1.0, -1.0, 1.0, 1.0])
    signal = result.control_signal(0.0)
    assert signal(0.25)[0] == -1.0 and signal(1.75)[0] == 1.0


def test_oracle_matches_extended_integration():
    """A single-point U: the oracle cost is x0(t1) from integrate_extended at the same step."""
    p = make_problem(lambda x, u: -x * x + u, lambda x, u: float(x @ x + u @ u),
                     control_set=FiniteControlSet([[0.3]]), x0=np.array([1.0]))
    result = direct_oracle(p, 2, 1, substeps=5)
    states = integrate_extended(p, ControlSignal([0.0, 0.5, 1.0], [[0.3], [0.3]]), step=0.1)
    assert result.cost == pytest.approx(states.final[0], abs=1e-12)


def test_oracle_is_deterministic():
    """Repeated runs pick the same schedule."""
    case = get_case("min_time_to_line")
    settings = case.oracle_settings
    a = direct_oracle(case.problem, settings.intervals, settings.grid_points, settings.time_grid)
    b = direct_oracle(case.problem, settings.intervals, settings.grid_points, settings.time_grid)
    assert a.to_dict() == b.to_dict()


def test_oracle_budget_and_inputs():
    """Oversized enumerations and missing time grids are refused."""
    lq = get_case("lq_terminal_cost").problem
    with pytest.raises(BudgetExceeded):
        direct_oracle(lq, 10, 21, budget=1000)
    with pytest.raises(ValidationError):
        direct_oracle(lq, 0, 3)
    free = make_problem(lambda x, u: np.asarray(u, dtype=float), lambda x, u: 1.0, time_mode=TimeMode.free())
    with pytest.raises(ValidationError):
        direct_oracle(free, 2, 3)
    with pytest.raises(ValidationError):
        direct_oracle(free, 2, 3, time_grid=[-1.0, 1.0])


def test_run_benchmarks_table():
    """Rows converge, match the analytic costs and stay within oracle slack; failures are flagged."""
    cases = [get_case("min_time_to_line"), get_case("lq_terminal_cost")]
    frame = run_benchmarks(cases, ShootingOptions(step=1e-2))
    assert list(frame.columns) == list(AppConstants.BENCH_COLUMNS)
    assert list(frame["case"]) == ["min_time_to_line", "lq_terminal_cost"]
    assert frame["converged"].all()
    assert (frame["solver_gap"] <= 1e-4).all()
    assert (frame["oracle_gap"] <= frame["oracle_slack"]).all()
    assert bench_passed(frame)

    beaten = frame.copy()
    beaten.loc[1, "oracle_gap"] = 1.0
    assert not bench_passed(beaten)
    failed = frame.copy()
    failed.loc[0, "converged"] = False
    assert not bench_passed(failed)
    no_oracle = frame.copy()
    no_oracle.loc[0, "oracle_gap"] = np.nan
    assert bench_passed(no_oracle)


def test_psi_k_and_chart_suites():
    """Reduced-sample runs of the terminal-cost and chart suites pass."""
    psi = psi_k_suite(samples=50, seed=2)
    assert psi.passed, psi.to_dict()
    charts = charts_suite(samples=50, seed=2)
    assert charts.passed, charts.to_dict()


def test_run_suites_selection():
    """Named suites run in the fixed order; unknown names are rejected."""
    results = run_suites(["pairing", "homogeneity"], samples=3, seed=1)
    assert [r.name for r in results] == ["homogeneity", "pairing"]
    assert all(r.passed for r in results)
    assert results[0].to_dict()["samples"] == 3
    with pytest.raises(ValidationError):
        run_suites(["fourier"])
