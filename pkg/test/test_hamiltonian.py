#!/usr/bin/env python3
"""
Tests for the problem model, control Hamiltonians and the pointwise maximizer.
"""

from dataclasses import replace

import numpy as np
import pytest

from bench.registry import get_dynamics, quadratic_argmax
from bench.suites import homogeneity_suite, random_linear_problem
from conftest import make_problem
from core.hamiltonian import (
    OptimalContactHamiltonian,
    batch_control_hamiltonian,
    contact_control_hamiltonian,
    control_hamiltonian,
    extend_system,
    maximize_control,
    optimal_contact_hamiltonian,
)
from core.projective import from_vector
from models.costate import ProjectiveCostate
from models.problem import (
    BoxControlSet,
    ExtendedState,
    FiniteControlSet,
    TargetSet,
    TerminalCost,
    TimeMode,
)
from utils.error_handlers import ControlOutOfSet, EvaluationFailure, ValidationError


def _lq_scalar():
    """f = u, L = (x^2 + u^2)/2."""
    return make_problem(lambda x, u: np.asarray(u, dtype=float),
                        lambda x, u: 0.5 * (float(x[0]) ** 2 + float(u[0]) ** 2))


def _energy_scalar():
    """h_c = lambda u - u^2/2 in the normal chart."""
    return make_problem(lambda x, u: np.asarray(u, dtype=float), lambda x, u: 0.5 * float(u[0]) ** 2)


def test_extend_system_examples(double_integrator_case):
    """fhat = (L, f), independent of x0."""
    minimum_time = make_problem(lambda x, u: np.asarray(u, dtype=float), lambda x, u: 1.0)
    fhat = extend_system(minimum_time)
    np.testing.assert_allclose(fhat(np.array([0.0, 3.0]), np.array([0.5])), [1.0, 0.5])
    np.testing.assert_allclose(fhat(np.array([7.0, 3.0]), np.array([0.5])), [1.0, 0.5])

    free_running = make_problem(lambda x, u: np.asarray(u, dtype=float), lambda x, u: 0.0)
    assert extend_system(free_running)(np.array([0.0, 1.0]), np.array([0.2]))[0] == 0.0

    di = double_integrator_case.problem
    np.testing.assert_allclose(extend_system(di)(np.array([0.0, 1.0, 0.0]), np.array([-1.0])), [1.0, 0.0, -1.0])


def test_control_hamiltonian_examples():
    """H_c = <nuhat, fhat>."""
    p = _lq_scalar()
    xhat = ExtendedState(0.0, [1.0])
    assert control_hamiltonian(p, xhat, np.array([-1.0, 2.0]), np.array([0.5])) == pytest.approx(0.375)
    assert control_hamiltonian(p, xhat, np.array([-1.0, 0.0]), np.array([0.5])) == pytest.approx(-0.625)
    assert control_hamiltonian(p, xhat, np.array([-2.0, 4.0]), np.array([0.5])) == pytest.approx(0.75)


def test_control_hamiltonian_rejects_controls_outside_u():
    """Box membership is componentwise; finite sets need exact membership."""
    p = _lq_scalar()
    with pytest.raises(ControlOutOfSet):
        control_hamiltonian(p, np.array([0.0, 1.0]), np.array([-1.0, 2.0]), np.array([1.5]))

    finite = replace(p, control_set=FiniteControlSet(np.array([[-1.0], [1.0]])))
    with pytest.raises(ControlOutOfSet):
        control_hamiltonian(finite, np.array([0.0, 1.0]), np.array([-1.0, 2.0]), np.array([0.5]))


def test_contact_control_hamiltonian_examples(double_integrator_case):
    """Normal chart lambda . f - L; abnormal chart alpha . f."""
    p = _lq_scalar()
    assert contact_control_hamiltonian(p, np.array([0.0, 1.0]), ProjectiveCostate.normal([2.0]),
                                       np.array([0.5])) == pytest.approx(0.375)

    di = double_integrator_case.problem
    value = contact_control_hamiltonian(di, np.array([0.0, 0.0, 2.0]), ProjectiveCostate.abnormal(1, [1.0, -1.0]),
                                        np.array([0.3]))
    assert value == pytest.approx(1.7)

    zero = make_problem(lambda x, u: np.zeros(2), lambda x, u: 0.0, n=2)
    assert contact_control_hamiltonian(zero, np.zeros(3), ProjectiveCostate.normal([3.0, -1.0]),
                                       np.array([0.1])) == 0.0


def test_homogeneity_of_control_hamiltonian(rng):
    """H_c(k nu) = k H_c(nu) for random linear problems."""
    for _ in range(200):
        p = random_linear_problem(rng, 3, 2)
        xhat = rng.standard_normal(4)
        nu = rng.standard_normal(4)
        u = rng.uniform(-1.0, 1.0, 2)
        k = rng.uniform(-5.0, 5.0)
        base = control_hamiltonian(p, xhat, nu, u)
        assert abs(control_hamiltonian(p, xhat, k * nu, u) - k * base) <= 1e-12 * (1.0 + abs(k * base))


def test_homogeneity_suite_passes():
    """The homogeneity invariant suite passes on a reduced sample."""
    result = homogeneity_suite(samples=100, seed=7)
    assert result.passed, result.to_dict()


def test_projection_consistency(rng):
    """h_c([nu]) |nu0| = H_c(nu) for nu0 < 0 with the same maximizer."""
    p = random_linear_problem(rng, 2, 1)
    for _ in range(50):
        nu = rng.standard_normal(3)
        nu[0] = -abs(nu[0]) - 0.1
        xhat = rng.standard_normal(3)
        u = rng.uniform(-1.0, 1.0, 1)
        pc = from_vector(nu)
        assert contact_control_hamiltonian(p, xhat, pc, u) * abs(nu[0]) == pytest.approx(
            control_hamiltonian(p, xhat, nu, u), abs=1e-10)
        u_raw, _ = maximize_control(p, xhat, nu)
        u_chart, _ = maximize_control(p, xhat, pc)
        np.testing.assert_allclose(u_raw, u_chart, atol=1e-12)


def test_maximize_control_interior_and_clamped():
    """Grid-then-refine finds interior and boundary maximizers of lambda u - u^2/2."""
    p = _energy_scalar()
    u, h = maximize_control(p, np.array([0.0, 0.0]), ProjectiveCostate.normal([0.5]))
    assert u[0] == pytest.approx(0.5, abs=1e-6)
    assert h == pytest.approx(0.125, abs=1e-10)

    u, h = maximize_control(p, np.array([0.0, 0.0]), ProjectiveCostate.normal([3.0]))
    assert u[0] == pytest.approx(1.0)
    assert h == pytest.approx(2.5)
    assert optimal_contact_hamiltonian(p, np.array([0.0, 0.0]), ProjectiveCostate.normal([3.0])) == pytest.approx(2.5)


def test_grid_maximizer_matches_analytic_argmax(rng):
    """Refined grid values agree with the analytic maximizer to 1e-6."""
    spec = get_dynamics("linear_quadratic", {"A": [[0.0, 1.0], [-1.0, 0.0]], "B": [[0.0], [1.0]], "r": 0.7})
    U = BoxControlSet(np.array([-1.0]), np.array([1.0]))
    analytic = make_problem(spec.dynamics, spec.running_cost, n=2, m=1, control_set=U,
                            argmax=spec.argmax_for(U), vectorized=True)
    grid = replace(analytic, argmax=None)
    for _ in range(50):
        xhat = rng.standard_normal(3)
        pc = ProjectiveCostate.normal(rng.standard_normal(2))
        assert maximize_control(grid, xhat, pc)[1] == pytest.approx(maximize_control(analytic, xhat, pc)[1], abs=1e-6)


def test_double_integrator_maximizer(double_integrator_case):
    """lambda = (-1, -0.5) at x = (1, 0) picks u* = -1, analytically and on the grid."""
    p = double_integrator_case.problem
    pc = ProjectiveCostate.normal([-1.0, -0.5])
    xhat = np.array([0.0, 1.0, 0.0])
    assert maximize_control(p, xhat, pc)[0][0] == -1.0
    assert maximize_control(replace(p, argmax=None), xhat, pc)[0][0] == pytest.approx(-1.0)


def test_finite_control_set_ties_take_first_point():
    """Exact maximum over a finite U, smallest index on ties."""
    U = FiniteControlSet(np.array([[-1.0], [0.0], [1.0]]))
    p = make_problem(lambda x, u: np.asarray(u, dtype=float), lambda x, u: 0.0, control_set=U)
    u, h = maximize_control(p, np.zeros(2), ProjectiveCostate.normal([0.0]))
    assert u[0] == -1.0 and h == 0.0
    u, h = maximize_control(p, np.zeros(2), ProjectiveCostate.normal([2.0]))
    assert u[0] == 1.0 and h == 2.0


def test_maximizer_reports_nonfinite_hamiltonian():
    """EvaluationFailure when h_c is non-finite everywhere on U."""
    p = make_problem(lambda x, u: np.asarray(u, dtype=float), lambda x, u: float("nan"))
    with pytest.raises(EvaluationFailure):
        maximize_control(p, np.zeros(2), ProjectiveCostate.normal([1.0]))


def test_batch_matches_pointwise(rng):
    """Vectorized and pointwise evaluation agree."""
    p = random_linear_problem(rng, 2, 2)
    controls = rng.uniform(-1.0, 1.0, (7, 2))
    x = rng.standard_normal(2)
    nu = rng.standard_normal(3)
    batch = batch_control_hamiltonian(p, x, nu, controls)
    pointwise = [control_hamiltonian(p, np.concatenate(([0.0], x)), nu, u) for u in controls]
    np.testing.assert_allclose(batch, pointwise, atol=1e-12)


def test_optimal_hamiltonian_envelope_partials(double_integrator_case):
    """dh/dnu = fhat(u*) and dh/dx0 = 0."""
    p = double_integrator_case.problem
    h = OptimalContactHamiltonian(p)
    xhat = np.array([0.5, 1.0, -0.3])
    nu = np.array([-1.0, 0.4, 0.9])
    value, gx, gnu = h.evaluate(xhat, nu)
    np.testing.assert_allclose(gnu, [1.0, -0.3, 1.0])
    assert gx[0] == 0.0
    assert value == pytest.approx(0.4 * -0.3 + 0.9 - 1.0)
    assert h.control_jump(np.array([-1.0]), np.array([1.0]))
    assert not h.control_jump(np.array([1.0]), np.array([1.0]))


def test_quadratic_argmax():
    """Concave axes clip the stationary point; linear axes take the better end, lower on ties."""
    lo, hi = np.array([-1.0, -1.0]), np.array([1.0, 1.0])
    np.testing.assert_allclose(quadratic_argmax(np.array([0.5, 0.0]), np.array([-1.0, 0.0]), lo, hi), [0.5, -1.0])
    np.testing.assert_allclose(quadratic_argmax(np.array([3.0, 2.0]), np.array([-1.0, 0.0]), lo, hi), [1.0, 1.0])


def test_problem_construction_checks():
    """Invalid dimensions, unbounded boxes and fixed times before t0 are rejected."""
    with pytest.raises(ValidationError):
        BoxControlSet(np.array([-np.inf]), np.array([1.0]))
    with pytest.raises(ValidationError):
        BoxControlSet(np.array([1.0]), np.array([-1.0]))
    with pytest.raises(ValidationError):
        make_problem(lambda x, u: u, lambda x, u: 0.0, x0=np.zeros(2))
    with pytest.raises(ValidationError):
        make_problem(lambda x, u: u, lambda x, u: 0.0, time_mode=TimeMode.fixed(-1.0))
    with pytest.raises(ValidationError):
        TimeMode(TimeMode.fixed(1.0).kind)


def test_target_and_terminal_cost():
    """Level-set targets and quadratic terminal costs."""
    line = TargetSet.hyperplane([1.0, 0.0], 0.5)
    np.testing.assert_allclose(line.value(np.array([2.0, 3.0])), [1.5])
    np.testing.assert_allclose(line.dg(np.array([2.0, 3.0])), [[1.0, 0.0]])
    assert TargetSet.free().dg(np.zeros(2)).shape == (0, 2)

    K = TerminalCost.quadratic(2.0, [1.0, 0.0])
    assert K(np.array([2.0, 1.0])) == pytest.approx(2.0)
    np.testing.assert_allclose(K.grad(np.array([2.0, 1.0])), [2.0, 2.0])
    assert K.negated()(np.array([2.0, 1.0])) == pytest.approx(-2.0)
