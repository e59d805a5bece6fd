#!/usr/bin/env python3
"""
Tests for extended-state, adjoint and tangent propagation along fixed controls.
"""

import numpy as np
import pytest

from bench.catalog import get_case
from bench.suites import pairing_suite, random_linear_problem
from conftest import make_problem
from core.contact import integrate_symplectic
from core.hamiltonian import FrozenControlHamiltonian
from core.propagation import (
    integrate_extended,
    pairing_defect,
    pairing_values,
    propagate_adjoint,
    propagate_tangent,
)
from models.trajectory import ControlSignal, SampledTrajectory
from utils.error_handlers import ControlOutOfSet, GridMismatch, ValidationError


def test_integrate_extended_examples(double_integrator_case):
    """Closed-form extended trajectories for constant controls."""
    p = make_problem(lambda x, u: np.asarray(u, dtype=float), lambda x, u: 1.0)
    states = integrate_extended(p, ControlSignal.constant([0.5], 0.0, 2.0), 0.0, 2.0, step=0.1)
    np.testing.assert_allclose(states.final, [2.0, 1.0], atol=1e-12)

    free = make_problem(lambda x, u: np.asarray(u, dtype=float), lambda x, u: 0.0)
    states = integrate_extended(free, ControlSignal.constant([0.5], 0.0, 1.0), 0.0, 1.0, step=0.1)
    assert np.all(states.values[:, 0] == 0.0)

    di = double_integrator_case.problem
    states = integrate_extended(di, ControlSignal.constant([-1.0], 0.0, 1.0), 0.0, 1.0, step=0.1)
    np.testing.assert_allclose(states.final, [1.0, 0.5, -1.0], atol=1e-12)


def test_piecewise_controls_integrate_segment_by_segment(double_integrator_case):
    """Breakpoints become sample times and quadratic kinematics stay exact."""
    di = double_integrator_case.problem
    control = ControlSignal([0.0, 0.35, 1.0], [[-1.0], [1.0]])
    states = integrate_extended(di, control, step=0.1)
    assert np.any(np.isclose(states.times, 0.35, rtol=0.0, atol=1e-15))
    np.testing.assert_allclose(states.final[1:], [0.9225, 0.3], atol=1e-12)
    assert np.all(np.diff(states.values[:, 0]) >= 0)


def test_closed_form_control():
    """u(t) = t/2 on x' = u gives x(1) = 1/4 exactly under RK4."""
    p = make_problem(lambda x, u: np.asarray(u, dtype=float), lambda x, u: 1.0)
    control = ControlSignal.closed_form(lambda t: [0.5 * t], 1)
    states = integrate_extended(p, control, step=0.1)
    np.testing.assert_allclose(states.final, [1.0, 0.25], atol=1e-12)
    assert control.on_interval(0.0, 1.0) is None
    with pytest.raises(ValidationError):
        ControlSignal(func=lambda t: [t])


def test_controls_outside_u_are_rejected(double_integrator_case):
    """Schedule values must lie in U."""
    with pytest.raises(ControlOutOfSet):
        integrate_extended(double_integrator_case.problem, ControlSignal.constant([2.0], 0.0, 1.0))


def test_adjoint_closed_form(scalar_growth_problem):
    """f = x, L = 0: nu(t) = c e^{t1 - t} with nu0 exactly constant."""
    p = scalar_growth_problem
    control = ControlSignal.constant([0.0], 0.0, 1.0)
    states = integrate_extended(p, control, 0.0, 1.0, step=1e-2)
    adjoint = propagate_adjoint(p, states, control, [-1.0, 2.0])
    np.testing.assert_allclose(adjoint.values[:, 1], 2.0 * np.exp(1.0 - adjoint.times), rtol=1e-9)
    assert np.all(adjoint.values[:, 0] == -1.0)


def test_adjoint_trivial_cases(double_integrator_case):
    """A zero-Jacobian problem keeps nu constant; (-1, 0) stays put when L_x = 0."""
    p = make_problem(lambda x, u: np.asarray(u, dtype=float), lambda x, u: 1.0,
                     dynamics_jacobian=lambda x, u: np.zeros((1, 1)), cost_gradient=lambda x, u: np.zeros(1))
    control = ControlSignal.constant([0.3], 0.0, 1.0)
    states = integrate_extended(p, control, 0.0, 1.0, step=0.1)
    adjoint = propagate_adjoint(p, states, control, [-1.0, 0.7])
    np.testing.assert_array_equal(adjoint.values, np.tile([-1.0, 0.7], (len(adjoint), 1)))

    di = double_integrator_case.problem
    control = ControlSignal.constant([1.0], 0.0, 1.0)
    states = integrate_extended(di, control, 0.0, 1.0, step=0.1)
    adjoint = propagate_adjoint(di, states, control, [-1.0, 0.0, 0.0])
    np.testing.assert_array_equal(adjoint.values, np.tile([-1.0, 0.0, 0.0], (len(adjoint), 1)))


def test_adjoint_is_fourth_order(scalar_growth_problem):
    """Halving the step cuts the adjoint error by at least 12."""
    p = scalar_growth_problem
    control = ControlSignal.constant([0.0], 0.0, 1.0)
    errors = []
    for step in (0.2, 0.1):
        states = integrate_extended(p, control, 0.0, 1.0, step=step)
        adjoint = propagate_adjoint(p, states, control, [-1.0, 1.0])
        errors.append(abs(adjoint.values[0, 1] - np.e))
    assert errors[1] < errors[0] / 12.0


def test_tangent_closed_form(scalar_growth_problem):
    """f = x: dx(t) = e^t; the x0 direction and the zero tangent are invariant."""
    p = scalar_growth_problem
    control = ControlSignal.constant([0.0], 0.0, 1.0)
    states = integrate_extended(p, control, 0.0, 1.0, step=1e-2)

    tangent = propagate_tangent(p, states, control, [0.0, 1.0])
    np.testing.assert_allclose(tangent.values[:, 1], np.exp(tangent.times), rtol=1e-9)
    assert np.all(tangent.values[:, 0] == 0.0)

    np.testing.assert_array_equal(propagate_tangent(p, states, control, [1.0, 0.0]).values,
                                  np.tile([1.0, 0.0], (len(states), 1)))
    assert not np.any(propagate_tangent(p, states, control, [0.0, 0.0]).values)


def test_pairing_scalar_closed_form(scalar_growth_problem):
    """<nu, dx> = e^{t1 - t0} along the whole grid."""
    p = scalar_growth_problem
    control = ControlSignal.constant([0.0], 0.0, 1.0)
    states = integrate_extended(p, control, 0.0, 1.0, step=1e-2)
    adjoint = propagate_adjoint(p, states, control, [-1.0, 1.0])
    tangent = propagate_tangent(p, states, control, [0.0, 1.0])
    np.testing.assert_allclose(pairing_values(adjoint, tangent), np.e, rtol=1e-9)
    assert pairing_defect(adjoint, tangent) <= 1e-12

    zero = propagate_tangent(p, states, control, [0.0, 0.0])
    assert pairing_defect(adjoint, zero) == 0.0


def test_pairing_random_linear(rng):
    """Random 3-state linear system with piecewise controls: defect below 1e-6 at step 1e-3."""
    p = random_linear_problem(rng, 3, 2)
    control = ControlSignal([0.0, 0.4, 1.0], rng.uniform(-1.0, 1.0, (2, 2)))
    states = integrate_extended(p, control, 0.0, 1.0, step=1e-3)
    adjoint = propagate_adjoint(p, states, control, rng.standard_normal(4))
    tangent = propagate_tangent(p, states, control, rng.standard_normal(4))
    assert pairing_defect(adjoint, tangent) <= 1e-6


def test_pairing_holds_on_coarse_grids(rng):
    """Pairing is conserved to rounding at step 0.25."""
    p = random_linear_problem(rng, 2, 1)
    control = ControlSignal([0.0, 0.5, 1.0], [[0.4], [-0.8]])
    states = integrate_extended(p, control, 0.0, 1.0, step=0.25)
    adjoint = propagate_adjoint(p, states, control, [-1.0, 0.5, 2.0])
    tangent = propagate_tangent(p, states, control, [0.3, -1.0, 0.7])
    assert pairing_defect(adjoint, tangent) <= 1e-12


def test_pairing_suite_passes():
    """The pairing invariant suite passes on a reduced sample."""
    result = pairing_suite(samples=5, seed=11)
    assert result.passed, result.to_dict()


def test_adjoint_matches_symplectic_lift():
    """Backward adjoint then forward canonical flow returns to nu(t1)."""
    p = get_case("linear_pairing").problem
    u = np.array([0.3])
    control = ControlSignal.constant(u, 0.0, 1.0)
    states = integrate_extended(p, control, 0.0, 1.0, step=1e-2)
    nu1 = np.array([-1.0, 0.4, -0.2])
    adjoint = propagate_adjoint(p, states, control, nu1)

    _, xs, nus = integrate_symplectic(FrozenControlHamiltonian(p, u), states.initial, adjoint.initial,
                                      0.0, 1.0, 1e-2)
    np.testing.assert_allclose(xs[-1], states.final, atol=1e-8)
    np.testing.assert_allclose(nus[-1], nu1, atol=1e-8)


def test_grid_mismatch_and_invalid_inputs(scalar_growth_problem):
    """Different grids, zero terminal covectors and wrong sizes are rejected."""
    p = scalar_growth_problem
    control = ControlSignal.constant([0.0], 0.0, 1.0)
    fine = integrate_extended(p, control, 0.0, 1.0, step=0.1)
    coarse = integrate_extended(p, control, 0.0, 1.0, step=0.25)
    with pytest.raises(GridMismatch):
        pairing_defect(propagate_adjoint(p, fine, control, [-1.0, 1.0]),
                       propagate_tangent(p, coarse, control, [0.0, 1.0]))
    with pytest.raises(ValidationError):
        propagate_adjoint(p, fine, control, [0.0, 0.0])
    with pytest.raises(ValidationError):
        propagate_adjoint(p, fine, control, [-1.0, 1.0, 2.0])
    with pytest.raises(ValidationError):
        propagate_tangent(p, SampledTrajectory([0.0], [[0.0, 1.0]]), control, [0.0, 1.0])


def test_control_signal_validation():
    """Breakpoints strictly increase and match the value count."""
    with pytest.raises(ValidationError):
        ControlSignal([0.0, 1.0, 1.0], [[0.0], [1.0]])
    with pytest.raises(ValidationError):
        ControlSignal([0.0, 1.0], [[0.0], [1.0]])
    signal = ControlSignal([0.0, 0.5, 1.0], [[-1.0], [1.0]])
    assert signal(0.25)[0] == -1.0 and signal(0.5)[0] == 1.0 and signal(1.0)[0] == 1.0
    assert signal.segments(1.0, 0.0) == [(1.0, 0.5), (0.5, 0.0)]
