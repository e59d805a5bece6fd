#!/usr/bin/env python3
"""
Tests for the shooting residual, the Newton solver and its diagnostics.
"""

from dataclasses import replace

import logging

import numpy as np
import pytest

from core.contact import state_of
from core.shooting import (
    ShootingOptions,
    ShootingUnknowns,
    abnormal_guesses,
    default_starts,
    fold_terminal_cost,
    map_costate_trajectory,
    phi_k,
    psi_k,
    shooting_residual,
    solve,
    solve_multistart,
    terminal_cost_transversality_residual,
    transversality_residual,
    verify_extremal,
)
from models.costate import ProjectiveCostate
from models.problem import TargetSet, TerminalCost
from utils.error_handlers import InvalidUnknowns, NoConvergence, RankDeficient, ValidationError
from utils.settings import performance_config


def _lam(nu):
    return np.asarray(nu[1:]) / -nu[0]


def test_transversality_examples(line_case, double_integrator_case):
    """Line target x1 = 0 accepts multiples of (1, 0); a point target gives lambda1 - c."""
    line = line_case.problem
    np.testing.assert_allclose(transversality_residual([3.0, 0.0], [0.0, 2.0], line, [3.0]), [0.0, 0.0])
    np.testing.assert_allclose(transversality_residual([0.0, 1.0], [0.0, 2.0], line, [0.0]), [0.0, 1.0])

    point = double_integrator_case.problem
    np.testing.assert_allclose(transversality_residual([1.0, 2.0], [0.0, 0.0], point, [0.5, -1.0]), [0.5, 3.0])


def test_transversality_rank_deficient(line_case):
    """A target whose Jacobian loses rank cannot certify transversality."""
    degenerate = TargetSet(1, lambda x: np.array([x[0] ** 2]), lambda x: np.array([[2.0 * x[0], 0.0]]))
    p = replace(line_case.problem, target=degenerate)
    with pytest.raises(RankDeficient):
        transversality_residual([1.0, 0.0], [0.0, 0.0], p, [1.0])


def test_terminal_cost_transversality(lq_case, double_integrator_case):
    """K = x^2/2 at x1 = 0.5: residual mu1 + 0.5; K = 0 reduces to the plain residual."""
    p = lq_case.problem
    np.testing.assert_allclose(terminal_cost_transversality_residual([-0.5], [0.5], p, []), [0.0])
    np.testing.assert_allclose(terminal_cost_transversality_residual([0.25], [0.5], p, []), [0.75])

    di = double_integrator_case.problem
    np.testing.assert_array_equal(
        terminal_cost_transversality_residual([1.0, 2.0], [0.1, 0.2], di, [0.3, 0.4]),
        transversality_residual([1.0, 2.0], [0.1, 0.2], di, [0.3, 0.4]))


def test_psi_k_examples(rng):
    """Psi_K for K = x^2/2 and the identity for K = 0; Phi_K inverts through -K."""
    K = TerminalCost.quadratic()
    y0, y, mu = psi_k(K, 1.0, [2.0], [0.5])
    assert y0 == pytest.approx(3.0)
    np.testing.assert_allclose(y, [2.0])
    np.testing.assert_allclose(mu, [2.5])

    y0, y, mu = psi_k(None, 1.0, [2.0, -1.0], [0.5, 0.25])
    assert y0 == 1.0
    np.testing.assert_array_equal(mu, [0.5, 0.25])

    for _ in range(100):
        x = rng.standard_normal(3)
        x0 = float(rng.standard_normal())
        z0, z = phi_k(K, x0, x)
        back0, back = phi_k(K.negated(), z0, z)
        assert abs(back0 - x0) <= 1e-14 * max(1.0, abs(x0) + K(x))
        np.testing.assert_array_equal(back, x)


def test_analytic_unknowns_zero_the_residual(double_integrator_case, line_case, lq_case, fast_options):
    """Closed-form extremals satisfy every boundary condition."""
    for case in (double_integrator_case, line_case, lq_case):
        z = case.oracle.unknowns(case.problem)
        assert np.max(np.abs(shooting_residual(case.problem, z, fast_options))) <= 1e-6, case.name


def test_residual_input_checks(double_integrator_case, fast_options):
    """t1 <= t0 is invalid; wrong sizes are validation errors."""
    p = double_integrator_case.problem
    guess = double_integrator_case.initial_guess
    with pytest.raises(InvalidUnknowns):
        shooting_residual(p, replace(guess, t1=0.0), fast_options)
    with pytest.raises(ValidationError):
        shooting_residual(p, ShootingUnknowns.normal([0.0], t1=1.0, c=[0.0, 0.0]), fast_options)
    with pytest.raises(ValidationError):
        shooting_residual(p, ShootingUnknowns.normal([0.0, 0.0], t1=1.0, c=[0.0]), fast_options)
    with pytest.raises(ValidationError):
        shooting_residual(p, ShootingUnknowns.normal([0.0, 0.0], c=[0.0, 0.0]), fast_options)


def test_unknowns_vector_layout():
    """Abnormal unknowns drop the pivot entry and restore it."""
    z = ShootingUnknowns(ProjectiveCostate.abnormal(2, [0.5, 1.0, -2.0]), t1=1.5, c=[0.1], orientation=-1.0)
    vector = z.to_vector()
    np.testing.assert_array_equal(vector, [0.5, -2.0, 1.5, 0.1])
    back = z.with_vector(vector + 1.0)
    np.testing.assert_allclose(back.costate.coords, [1.5, 1.0, -1.0])
    assert back.t1 == 2.5 and back.orientation == -1.0
    np.testing.assert_allclose(back.c, [1.1])
    with pytest.raises(ValidationError):
        replace(z, orientation=0.5)


def test_abnormal_guesses_cover_every_pivot_and_orientation(double_integrator_case):
    """2n guesses, all in abnormal charts, both signs per pivot."""
    guesses = abnormal_guesses(double_integrator_case.initial_guess)
    assert len(guesses) == 4
    assert sorted(g.costate.pivot for g in guesses) == [1, 1, 2, 2]
    assert all(not g.costate.is_normal for g in guesses)
    assert {g.orientation for g in guesses} == {1.0, -1.0}


def test_double_integrator_min_time(double_integrator_case, fast_options):
    """t1 = 2, one switch at 1, lambda0 = (-1, -1), c = (-1, 1), cost 2."""
    case = double_integrator_case
    result = solve(case.problem, case.initial_guess, fast_options)
    assert result.converged and result.classification == "normal"
    assert result.unknowns.t1 == pytest.approx(2.0, abs=1e-4)
    assert len(result.trajectory.switch_times) == 1
    assert result.trajectory.switch_times[0] == pytest.approx(1.0, abs=1e-4)
    np.testing.assert_allclose(result.unknowns.costate.coords, [-1.0, -1.0], atol=1e-4)
    np.testing.assert_allclose(result.unknowns.c, [-1.0, 1.0], atol=1e-4)
    assert result.cost == pytest.approx(2.0, abs=1e-4)
    assert result.residual_norm <= fast_options.tol


def test_min_time_to_line(line_case, fast_options):
    """t1 = sqrt(2) and the switching function vanishes at t1."""
    result = solve(line_case.problem, line_case.initial_guess, fast_options)
    assert result.unknowns.t1 == pytest.approx(np.sqrt(2.0), abs=1e-4)
    _, nu1 = state_of(result.trajectory, -1)
    assert abs(_lam(nu1)[1]) <= 1e-6
    np.testing.assert_allclose(result.unknowns.c, [-1.0 / np.sqrt(2.0)], atol=1e-4)

    diagnostics = verify_extremal(line_case.problem, result)
    assert diagnostics["hamiltonian_variation"] <= 1e-6
    assert diagnostics["terminal_h_defect"] <= 1e-6


def test_lq_terminal_cost(lq_case, fast_options):
    """mu0 = -0.5 and cost 0.25 to 1e-8."""
    result = solve(lq_case.problem, lq_case.initial_guess, fast_options)
    np.testing.assert_allclose(result.unknowns.costate.coords, [-0.5], atol=1e-8)
    assert result.cost == pytest.approx(0.25, abs=1e-8)
    diagnostics = verify_extremal(lq_case.problem, result)
    assert diagnostics["terminal_cost_transversality_defect"] <= 1e-8


def test_lq_adaptive_integration(lq_case):
    """RK45 agrees with RK4 on a constant-control extremal."""
    result = solve(lq_case.problem, lq_case.initial_guess, ShootingOptions(method="rk45"))
    assert result.cost == pytest.approx(0.25, abs=1e-7)


def test_solution_is_independent_of_guess_scale(lq_case, fast_options):
    """Different starting costates reach the same extremal."""
    p = lq_case.problem
    a = solve(p, ShootingUnknowns.normal([0.0]), fast_options)
    b = solve(p, ShootingUnknowns.normal([2.0]), fast_options)
    np.testing.assert_allclose(a.unknowns.costate.coords, b.unknowns.costate.coords, atol=1e-8)


def test_verify_extremal(double_integrator_case, fast_options):
    """Solved extremals pass the necessary-condition checks."""
    case = double_integrator_case
    result = solve(case.problem, case.initial_guess, fast_options)
    diagnostics = verify_extremal(case.problem, result)
    assert diagnostics["max_principle_defect"] <= 1e-8
    assert diagnostics["pairing_defect"] <= 1e-6
    assert diagnostics["nu0_sign_ok"]
    assert diagnostics["target_defect"] <= 1e-6
    assert diagnostics["transversality_defect"] == pytest.approx(diagnostics["terminal_cost_transversality_defect"])
    assert result.trajectory.diagnostics["max_principle_defect"] == diagnostics["max_principle_defect"]


def test_fold_terminal_cost(lq_case, double_integrator_case, fast_options):
    """The folded problem has costate 0.5 at t0 and cost shifted by K(x(t0))."""
    p = lq_case.problem
    folded = fold_terminal_cost(p)
    assert folded.terminal_cost is None
    result = solve(folded, ShootingUnknowns.normal([0.0]), fast_options)
    np.testing.assert_allclose(result.unknowns.costate.coords, [0.5], atol=1e-8)
    assert result.cost + p.K(p.x0) == pytest.approx(0.25, abs=1e-8)
    di = double_integrator_case.problem
    assert fold_terminal_cost(di) is di


def test_map_costate_trajectory(lq_case, fast_options):
    """Psi_K sends the terminal-cost extremal to one with zero terminal costate."""
    p = lq_case.problem
    result = solve(p, lq_case.initial_guess, fast_options)
    mapped = map_costate_trajectory(p, result.trajectory)
    assert len(mapped.states) == len(result.trajectory.states)

    xhat0, nu0 = state_of(mapped, 0)
    assert xhat0[0] == pytest.approx(0.5)
    np.testing.assert_allclose(_lam(nu0), [0.5], atol=1e-8)
    _, nu1 = state_of(mapped, -1)
    np.testing.assert_allclose(_lam(nu1), [0.0], atol=1e-8)
    assert np.all(mapped.orientation == 1.0)


def test_no_convergence_carries_best_attempt(double_integrator_case):
    """A single Newton step is not enough from the default guess."""
    case = double_integrator_case
    opts = ShootingOptions(step=1e-2, max_iter=1, chart="normal")
    with pytest.raises(NoConvergence) as info:
        solve(case.problem, case.initial_guess, opts)
    assert info.value.residual_history
    assert info.value.to_dict()["code"] == "NO_CONVERGENCE"


def test_multistart_is_sorted_and_deterministic(lq_case, fast_options):
    """Every start converges to the same cost; results sorted by (cost, start index)."""
    p = lq_case.problem
    starts = default_starts(p, lq_case.initial_guess, 3, seed=5)
    assert len(starts) == 3 and starts[0] is lq_case.initial_guess
    again = default_starts(p, lq_case.initial_guess, 3, seed=5)
    for a, b in zip(starts, again):
        np.testing.assert_array_equal(a.to_vector(), b.to_vector())

    results = solve_multistart(p, starts, fast_options)
    assert len(results) == 3
    assert all(r.cost == pytest.approx(0.25, abs=1e-8) for r in results)
    keys = [(r.cost, r.start_index) for r in results]
    assert keys == sorted(keys)


def test_parallel_multistart_timers(lq_case, fast_options, monkeypatch, caplog):
    """Concurrent solves each time their own call."""
    monkeypatch.setattr(performance_config, "max_threads", 4)
    p = lq_case.problem
    starts = default_starts(p, lq_case.initial_guess, 3, seed=5)
    with caplog.at_level(logging.WARNING):
        solve_multistart(p, starts, fast_options)
    assert not [r for r in caplog.records if "was not started" in r.getMessage()]
