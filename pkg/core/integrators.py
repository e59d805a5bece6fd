"""
Time stepping primitives.

Classic fixed-step RK4 on a uniform grid, and an adaptive RK45 wrapper around
scipy's solve_ivp. Both accept fields f(t, y) and integrate in either time
direction.
"""

import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from utils.error_handlers import StepFailure, ValidationError
from utils.logger import get_logger
from utils.settings import integrator_config

logger = get_logger(__name__)

Field = Callable[[float, np.ndarray], np.ndarray]


def rk4_step(field: Field, t: float, y: np.ndarray, h: float) -> np.ndarray:
    """One classic Runge-Kutta step of signed length h."""
    k1 = field(t, y)
    k2 = field(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = field(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = field(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def uniform_grid(t_a: float, t_b: float, step: float) -> np.ndarray:
    """n = ceil(|t_b - t_a| / step) uniform steps from t_a to t_b inclusive."""
    if not step > 0:
        raise ValidationError("Integrator step must be positive", field="step")
    span = t_b - t_a
    if span == 0:
        raise ValidationError("Integration span is degenerate", field="span")
    n = max(1, int(math.ceil(abs(span) / step - 1e-9)))
    grid = t_a + span * np.arange(n + 1) / n
    grid[-1] = t_b
    return grid


def check_finite(y: np.ndarray, t: float) -> np.ndarray:
    if not np.all(np.isfinite(y)):
        raise StepFailure(f"Non-finite state produced at t={t:.6g}")
    return y


def integrate_rk4(field: Field, y0: Sequence[float], t_a: float, t_b: float,
                  step: float = None) -> Tuple[np.ndarray, np.ndarray]:
    """Fixed-step RK4; returns (times, samples) with samples[i] at times[i]."""
    grid = uniform_grid(t_a, t_b, integrator_config.step if step is None else step)
    ys = np.empty((grid.size, np.size(y0)))
    ys[0] = np.asarray(y0, dtype=float)
    for i in range(grid.size - 1):
        h = grid[i + 1] - grid[i]
        ys[i + 1] = check_finite(rk4_step(field, grid[i], ys[i], h), grid[i + 1])
    return grid, ys


def integrate_adaptive(field: Field, y0: Sequence[float], t_a: float, t_b: float,
                       rtol: float = None, atol: float = None,
                       events: Optional[List[Callable]] = None,
                       max_step: float = np.inf):
    """
    Adaptive RK45 through solve_ivp.

    Returns the scipy result; status -1 (step-size underflow or a failing
    right-hand side) raises StepFailure. Terminal events stop the run early
    (status 1) and are left to the caller.
    """
    if t_a == t_b:
        raise ValidationError("Integration span is degenerate", field="span")
    sol = solve_ivp(
        field,
        (t_a, t_b),
        np.asarray(y0, dtype=float),
        method="RK45",
        rtol=integrator_config.rtol if rtol is None else rtol,
        atol=integrator_config.atol if atol is None else atol,
        events=events,
        max_step=max_step,
    )
    if sol.status == -1:
        raise StepFailure(f"Adaptive integration failed: {sol.message}")
    if not np.all(np.isfinite(sol.y)):
        raise StepFailure("Adaptive integration produced non-finite values")
    logger.debug("Adaptive segment finished", steps=sol.t.size, nfev=sol.nfev, status=sol.status)
    return sol


__all__ = [
    "rk4_step",
    "uniform_grid",
    "check_finite",
    "integrate_rk4",
    "integrate_adaptive",
]
