"""
Propagation along a fixed control.

Forward integration of the extended system, backward integration of the
adjoint (cotangent lift) and forward integration of the variational
equation (tangent lift), all with RK4 on a shared sample grid so that the
pairing <nuhat, dxhat> can be compared sample by sample. Piecewise-constant
controls are integrated segment by segment; RK4 never straddles a break.
"""

from typing import Callable, Optional, Sequence

import numpy as np

from core.integrators import check_finite, rk4_step, uniform_grid
from models.problem import OcpProblem
from models.trajectory import ControlSignal, ExtremalTrajectory, SampledTrajectory
from utils.error_handlers import GridMismatch, ValidationError
from utils.logger import get_logger, log_performance
from utils.settings import integrator_config

logger = get_logger(__name__)


def integrate_extended(p: OcpProblem, u: ControlSignal, t_a: float = None, t_b: float = None,
                       step: float = None, x0: Optional[Sequence[float]] = None) -> SampledTrajectory:
    """
    RK4 of xhat' = fhat(xhat, u(t)) from xhat(t_a) = (0, x0).

    Defaults: t_a = p.t0, t_b = the fixed terminal time or the signal's last
    breakpoint, x0 = p.x0.
    """
    u.validate(p.control_set)
    t_a = p.t0 if t_a is None else t_a
    if t_b is None:
        t_b = p.time_mode.t1 if not p.time_mode.is_free else (
            u.breakpoints[-1] if u.breakpoints is not None else None)
    if t_b is None:
        raise ValidationError("Terminal time required for a closed-form control", field="t1")
    step = integrator_config.step if step is None else step
    xhat = np.concatenate(([0.0], p.x0 if x0 is None else np.asarray(x0, dtype=float)))

    times = [t_a]
    samples = [xhat]
    for a, b in u.segments(t_a, t_b):
        u_const = u.on_interval(a, b)
        if u_const is not None:
            def field(t, y, u_const=u_const):
                return p.fhat(y, u_const)
        else:
            def field(t, y):
                return p.fhat(y, u(t))
        grid = uniform_grid(a, b, step)
        for i in range(grid.size - 1):
            xhat = check_finite(rk4_step(field, grid[i], xhat, grid[i + 1] - grid[i]), grid[i + 1])
            times.append(grid[i + 1])
            samples.append(xhat)
    return SampledTrajectory(np.asarray(times), np.stack(samples))


def state_trajectory(extremal: ExtremalTrajectory) -> SampledTrajectory:
    """Extended-state samples of an extremal."""
    return SampledTrajectory(extremal.times, extremal.xhat_array())


def _interval_controls(u: ControlSignal, a: float, b: float):
    """Controls at (a, midpoint, b) of one sample interval."""
    u_const = u.on_interval(a, b)
    if u_const is not None:
        return u_const, u_const, u_const
    return u(a), u(0.5 * (a + b)), u(b)


def _hermite_midpoint(p: OcpProblem, x_a: np.ndarray, x_b: np.ndarray,
                      u_a: np.ndarray, u_b: np.ndarray, h: float) -> np.ndarray:
    """Cubic Hermite state at the interval midpoint."""
    return 0.5 * (x_a + x_b) + h * (p.f(x_a, u_a) - p.f(x_b, u_b)) / 8.0


def _check_grid(states: SampledTrajectory) -> SampledTrajectory:
    if len(states) < 2:
        raise ValidationError("State trajectory needs at least two samples", field="states")
    if np.any(np.diff(states.times) <= 0):
        states = states.sorted()
        if np.any(np.diff(states.times) <= 0):
            raise ValidationError("State sample times must be distinct", field="states")
    return states


def _lifted_rk4(p: OcpProblem, states: SampledTrajectory, u: ControlSignal, y_start: np.ndarray,
                jac_field: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
                backward: bool) -> SampledTrajectory:
    """RK4 of a field linear in y along stored states, one step per sample interval."""
    times = states.times
    xs = states.values[:, 1:]
    out = np.empty((times.size, y_start.size))
    order = range(times.size - 1, 0, -1) if backward else range(times.size - 1)
    first = times.size - 1 if backward else 0
    out[first] = y_start
    y = y_start
    for i in order:
        j = i - 1 if backward else i + 1
        t_i, t_j = times[i], times[j]
        h = t_j - t_i
        lo, hi = min(i, j), max(i, j)
        u_lo, u_mid, u_hi = _interval_controls(u, times[lo], times[hi])
        x_mid = _hermite_midpoint(p, xs[lo], xs[hi], u_lo, u_hi, times[hi] - times[lo])
        if backward:
            x_start, u_start, x_end, u_end = xs[hi], u_hi, xs[lo], u_lo
        else:
            x_start, u_start, x_end, u_end = xs[lo], u_lo, xs[hi], u_hi

        k1 = jac_field(x_start, u_start, y)
        k2 = jac_field(x_mid, u_mid, y + 0.5 * h * k1)
        k3 = jac_field(x_mid, u_mid, y + 0.5 * h * k2)
        k4 = jac_field(x_end, u_end, y + h * k3)
        y = check_finite(y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), t_j)
        out[j] = y
    return SampledTrajectory(times.copy(), out)


@log_performance("propagate_adjoint")
def propagate_adjoint(p: OcpProblem, states: SampledTrajectory, u: ControlSignal,
                      nu1: Sequence[float]) -> SampledTrajectory:
    """
    Backward RK4 of nu0' = 0, nu' = -(nu0 L_x + f_x^T nu) from nuhat(t1) = nu1.

    nu0 is carried unchanged, so it is exactly constant along the output.
    """
    states = _check_grid(states)
    nu1 = np.asarray(nu1, dtype=float).reshape(-1)
    if nu1.size != p.n + 1:
        raise ValidationError(f"Terminal costate needs {p.n + 1} entries", field="nu1")
    if not np.any(nu1):
        raise ValidationError("Terminal costate must be nonzero", field="nu1")

    def field(x, u_value, nu):
        rate = np.zeros_like(nu)
        rate[1:] = -(nu[0] * p.L_x(x, u_value) + p.f_x(x, u_value).T @ nu[1:])
        return rate

    return _lifted_rk4(p, states, u, nu1, field, backward=True)


def propagate_tangent(p: OcpProblem, states: SampledTrajectory, u: ControlSignal,
                      dxhat0: Sequence[float]) -> SampledTrajectory:
    """Forward RK4 of dxhat' = Dfhat(xhat(t), u(t)) dxhat; the x0 column of Dfhat is zero."""
    states = _check_grid(states)
    dxhat0 = np.asarray(dxhat0, dtype=float).reshape(-1)
    if dxhat0.size != p.n + 1:
        raise ValidationError(f"Tangent needs {p.n + 1} entries", field="dxhat0")

    def field(x, u_value, w):
        xhat = np.concatenate(([0.0], x))
        return p.fhat_x(xhat, u_value) @ w

    return _lifted_rk4(p, states, u, dxhat0, field, backward=False)


def pairing_values(costates: SampledTrajectory, tangents: SampledTrajectory) -> np.ndarray:
    """<nuhat(t), dxhat(t)> per sample; raises GridMismatch on different grids."""
    if costates.times.shape != tangents.times.shape or not np.allclose(
            costates.times, tangents.times, rtol=0.0, atol=1e-12):
        raise GridMismatch("Costate and tangent samples do not share a time grid")
    return np.einsum("ij,ij->i", costates.values, tangents.values)


def pairing_defect(costates: SampledTrajectory, tangents: SampledTrajectory) -> float:
    """max_t |<nu(t), dx(t)> - <nu(t1), dx(t1)>|."""
    values = pairing_values(costates, tangents)
    final = values[int(np.argmax(costates.times))]
    return float(np.max(np.abs(values - final)))


__all__ = [
    "integrate_extended",
    "state_trajectory",
    "propagate_adjoint",
    "propagate_tangent",
    "pairing_values",
    "pairing_defect",
]
