"""
Shared fixtures for the solver tests.
"""

from typing import Callable, Optional

import numpy as np
import pytest

from bench.catalog import get_case
from core.shooting import ShootingOptions
from models.problem import BoxControlSet, ControlSet, OcpProblem, TargetSet, TimeMode


def make_problem(dynamics: Callable, running_cost: Callable, n: int = 1, m: int = 1,
                 control_set: Optional[ControlSet] = None, x0=None, target: Optional[TargetSet] = None,
                 time_mode: Optional[TimeMode] = None, **kwargs) -> OcpProblem:
    """Small non-vectorized problem with U = [-1, 1]^m unless given."""
    return OcpProblem(
        name=kwargs.pop("name", "test_problem"),
        n=n,
        m=m,
        dynamics=dynamics,
        running_cost=running_cost,
        control_set=control_set or BoxControlSet(-np.ones(m), np.ones(m)),
        x0=np.zeros(n) if x0 is None else x0,
        target=target or TargetSet.free(),
        time_mode=time_mode or TimeMode.fixed(1.0),
        **kwargs,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def fast_options():
    """Shooting options with an RK4 step of 1e-2."""
    return ShootingOptions(step=1e-2)


@pytest.fixture
def double_integrator_case():
    return get_case("double_integrator_min_time")


@pytest.fixture
def line_case():
    return get_case("min_time_to_line")


@pytest.fixture
def lq_case():
    return get_case("lq_terminal_cost")


@pytest.fixture
def scalar_growth_problem():
    """x' = x with L = 0; closed-form adjoint and tangent flows."""
    return make_problem(
        lambda x, u: np.asarray(x, dtype=float),
        lambda x, u: 0.0,
        dynamics_jacobian=lambda x, u: np.eye(1),
        cost_gradient=lambda x, u: np.zeros(1),
        x0=np.array([1.0]),
    )
