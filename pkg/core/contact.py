"""
Contact structure on the projectivized cotangent bundle of R^{n+1}.

Normal chart coordinates are (x0, x, lambda) with contact form
theta = -dx0 + lambda_i dx^i, two-form omega = dx^i ^ dlambda_i and Reeb
field R = -d/dx0. Contact Hamiltonian fields are assembled in every chart
through one formula: a chart pins index p of the homogeneous covector to the
value s (normal: p = 0, s = -1; abnormal: p = a, s = +1) and

    xdot_j     = dh/dnu_j                              (j != p)
    xdot_p     = s * (h - sum_{j != p} nu_j dh/dnu_j)
    nudot_j    = -dh/dx_j + (nu_j / s) * dh/dx_p       (j != p)
    nudot_p    = 0

which is the quotient of the homogeneous symplectic flow by positive
rescaling. Integration tracks oriented charts (s = +-1) because optimal
Hamiltonians are only positively homogeneous; samples are reported in the
canonical chart with their orientation.
"""

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from core.differentiation import central_gradient
from core.integrators import check_finite, integrate_adaptive, integrate_rk4, rk4_step, uniform_grid
from core.projective import chart_from_vector
from models.costate import ChartKind, ChartTag, ProjectiveCostate
from models.trajectory import ContactState, ExtremalTrajectory
from utils.error_handlers import ChartSingularity, DerivativeFailure, ValidationError
from utils.logger import get_logger
from utils.settings import chart_config, integrator_config

logger = get_logger(__name__)

HamiltonianFn = Callable[[np.ndarray, np.ndarray], float]
GradientFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


class ContactHamiltonian:
    """
    h(xhat, nuhat) evaluated on the chart homogeneous covector.

    In the normal chart nuhat = (-1, lambda), so a Hamiltonian written in
    lambda reads nu[1:]. Partials default to central finite differences.
    `homogeneous` marks functions that are positively homogeneous of degree
    one in nuhat; only those may be carried across chart switches.
    """

    switching = False
    homogeneous = False
    grad_x: Optional[GradientFn] = None
    grad_nu: Optional[GradientFn] = None

    def __init__(self, func: HamiltonianFn, grad_x: Optional[GradientFn] = None,
                 grad_nu: Optional[GradientFn] = None, homogeneous: bool = False, name: str = "h"):
        self.func = func
        self.grad_x = grad_x
        self.grad_nu = grad_nu
        self.homogeneous = homogeneous
        self.name = name

    def value(self, xhat: np.ndarray, nu: np.ndarray) -> float:
        return float(self.func(xhat, nu))

    def evaluate(self, xhat: np.ndarray, nu: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
        """(h, dh/dxhat, dh/dnuhat) at one point."""
        xhat = np.asarray(xhat, dtype=float)
        nu = np.asarray(nu, dtype=float)
        try:
            value = self.value(xhat, nu)
            gx = (np.asarray(self.grad_x(xhat, nu), dtype=float) if self.grad_x is not None
                  else central_gradient(lambda z: self.value(z, nu), xhat))
            gnu = (np.asarray(self.grad_nu(xhat, nu), dtype=float) if self.grad_nu is not None
                   else central_gradient(lambda z: self.value(xhat, z), nu))
        except (ArithmeticError, ValueError) as e:
            raise DerivativeFailure(f"Evaluating {self.name} failed: {e}", original_exception=e)
        if not (np.isfinite(value) and np.all(np.isfinite(gx)) and np.all(np.isfinite(gnu))):
            raise DerivativeFailure(f"{self.name} or its partials are non-finite at xhat={xhat.tolist()}")
        return value, gx, gnu

    def derivative_mismatch(self, xhat: np.ndarray, nu: np.ndarray) -> float:
        """Largest gap between supplied partials and central differences (0 when none supplied)."""
        gap = 0.0
        if self.grad_x is not None:
            fd = central_gradient(lambda z: self.value(z, nu), np.asarray(xhat, dtype=float))
            gap = max(gap, float(np.max(np.abs(fd - self.grad_x(xhat, nu)))))
        if self.grad_nu is not None:
            fd = central_gradient(lambda z: self.value(xhat, z), np.asarray(nu, dtype=float))
            gap = max(gap, float(np.max(np.abs(fd - self.grad_nu(xhat, nu)))))
        return gap

    def control(self, xhat: np.ndarray, nu: np.ndarray) -> np.ndarray:
        return np.zeros(0)

    def control_jump(self, u_a: np.ndarray, u_b: np.ndarray) -> bool:
        return False

    def frozen(self, u: np.ndarray) -> 'ContactHamiltonian':
        return self


@dataclass(frozen=True)
class OrientedChart:
    """Chart pinning homogeneous entry `index` to `sign` (+-1)."""

    index: int
    sign: float

    @classmethod
    def of(cls, pc: ProjectiveCostate) -> 'OrientedChart':
        return cls(0, -1.0) if pc.is_normal else cls(pc.pivot, 1.0)

    @classmethod
    def oriented(cls, pc: ProjectiveCostate, orientation: float) -> 'OrientedChart':
        """Chart of pc whose covector is orientation * pc.homogeneous()."""
        if pc.is_normal:
            return cls(0, -float(orientation))
        return cls(pc.pivot, float(orientation))

    @property
    def is_normal(self) -> bool:
        return self.index == 0

    @property
    def orientation(self) -> float:
        """Factor k with oriented covector = k * canonical homogeneous covector."""
        return -self.sign if self.is_normal else self.sign

    def tag(self) -> ChartTag:
        return ChartTag.normal() if self.is_normal else ChartTag.abnormal(self.index)


def costate_of(nu: np.ndarray, chart: OrientedChart) -> ProjectiveCostate:
    """Canonical chart costate of an oriented homogeneous covector."""
    return chart_from_vector(nu, chart.tag())


def chart_field(h: ContactHamiltonian, xhat: np.ndarray, nu: np.ndarray,
                chart: OrientedChart) -> Tuple[np.ndarray, np.ndarray]:
    """(xhat', nuhat') in an oriented chart; nuhat'[index] is exactly 0."""
    p, s = chart.index, chart.sign
    value, gx, gnu = h.evaluate(xhat, nu)
    mask = np.ones(nu.size, dtype=bool)
    mask[p] = False
    dx = gnu.copy()
    dx[p] = s * (value - nu[mask] @ gnu[mask])
    dnu = -gx + (nu / s) * gx[p]
    dnu[p] = 0.0
    return dx, dnu


def _require_normal(state: ContactState, operation: str) -> np.ndarray:
    if not state.costate.is_normal:
        raise ChartSingularity(f"{operation} is expressed in the normal chart only")
    return state.costate.coords


def _split_tangent(w: Sequence[float], n: int) -> Tuple[float, np.ndarray, np.ndarray]:
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.size != 2 * n + 1:
        raise ValidationError(f"Chart tangent needs {2 * n + 1} entries, got {w.size}", field="w")
    return w[0], w[1:n + 1], w[n + 1:]


def contact_form(state: ContactState, w: Sequence[float]) -> float:
    """theta(w) = -dx0 + lambda . dx for w = (dx0, dx, dlambda)."""
    lam = _require_normal(state, "contact_form")
    dx0, dx, _ = _split_tangent(w, state.n)
    return float(-dx0 + lam @ dx)


def reeb_field(state: ContactState) -> np.ndarray:
    """R = -d/dx0."""
    _require_normal(state, "reeb_field")
    tangent = np.zeros(2 * state.n + 1)
    tangent[0] = -1.0
    return tangent


def two_form(state: ContactState, v: Sequence[float], w: Sequence[float]) -> float:
    """omega(v, w) with omega = dx^i ^ dlambda_i."""
    _require_normal(state, "two_form")
    _, vx, vl = _split_tangent(v, state.n)
    _, wx, wl = _split_tangent(w, state.n)
    return float(vx @ wl - vl @ wx)


def contact_vector_field(h: ContactHamiltonian, state: ContactState) -> np.ndarray:
    """(x0', x', lambda') of X_h in the normal chart."""
    _require_normal(state, "contact_vector_field")
    nu = state.costate.homogeneous()
    dx, dnu = chart_field(h, state.xhat, nu, OrientedChart(0, -1.0))
    return np.concatenate((dx, dnu[1:]))


def contact_vector_field_abnormal(h: ContactHamiltonian, state: ContactState) -> np.ndarray:
    """(x0', x', alpha') of X_h in the abnormal chart; alpha'_a = 0 exactly."""
    pc = state.costate
    if pc.is_normal:
        raise ChartSingularity("contact_vector_field_abnormal needs an abnormal-chart state")
    nu = pc.homogeneous()
    if np.max(np.abs(nu)) > chart_config.alpha_bound:
        raise ChartSingularity(f"|alpha| exceeds {chart_config.alpha_bound:g}; the flow left chart {pc.pivot}")
    dx, dnu = chart_field(h, state.xhat, nu, OrientedChart(pc.pivot, 1.0))
    return np.concatenate((dx, dnu[1:]))


def defining_relation_defects(h: ContactHamiltonian, state: ContactState) -> Tuple[float, np.ndarray]:
    """
    |theta(X_h) - h| and the coefficients of iota_X omega - (dh - (dh.R) theta).

    Both vanish identically for the field returned by contact_vector_field.
    """
    lam = _require_normal(state, "defining_relation_defects")
    n = state.n
    nu = state.costate.homogeneous()
    value, gx, gnu = h.evaluate(state.xhat, nu)
    field = contact_vector_field(h, state)
    theta_defect = abs(contact_form(state, field) - value)

    _, fx, fl = _split_tangent(field, n)
    lhs = np.concatenate(([0.0], -fl, fx))
    # dh - (dh . R) theta, with dh . R = -dh/dx0
    rhs = np.concatenate(([gx[0]], gx[1:], gnu[1:])) + gx[0] * np.concatenate(([-1.0], lam, np.zeros(n)))
    return float(theta_defect), lhs - rhs


def symplectic_lift_field(H: ContactHamiltonian, xhat: Sequence[float],
                          nu: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Canonical equations xhat' = dH/dnu, nu' = -dH/dxhat."""
    _, gx, gnu = H.evaluate(np.asarray(xhat, dtype=float), np.asarray(nu, dtype=float))
    return gnu, -gx


def integrate_symplectic(H: ContactHamiltonian, xhat0: Sequence[float], nu0: Sequence[float],
                         t_a: float, t_b: float, step: float = None):
    """RK4 of the homogeneous symplectic lift; returns (times, xhat samples, nu samples)."""
    xhat0 = np.asarray(xhat0, dtype=float)
    nu0 = np.asarray(nu0, dtype=float)
    size = xhat0.size

    def field(t, y):
        dx, dnu = symplectic_lift_field(H, y[:size], y[size:])
        return np.concatenate((dx, dnu))

    times, ys = integrate_rk4(field, np.concatenate((xhat0, nu0)), t_a, t_b, step)
    return times, ys[:, :size], ys[:, size:]


# -- chart monitor -----------------------------------------------------

def _rescale(nu: np.ndarray, index: int) -> Tuple[np.ndarray, OrientedChart]:
    pinned = nu[index]
    sign = 1.0 if pinned > 0 else -1.0
    scaled = nu / abs(pinned)
    scaled[index] = sign
    return scaled, OrientedChart(index, sign)


def recharted(nu: np.ndarray, chart: OrientedChart,
              auto_switch: bool = True) -> Tuple[np.ndarray, OrientedChart]:
    """Apply the chart-selection thresholds after a step."""
    if not np.all(np.isfinite(nu)):
        raise ChartSingularity("Costate became non-finite")
    rest = np.abs(nu[1:])
    top = float(np.max(rest))
    if top <= chart_config.zero_tol and abs(nu[0]) <= chart_config.zero_tol:
        raise ChartSingularity("Costate collapsed to zero; no chart admits the point")

    if chart.is_normal:
        if auto_switch and abs(nu[0]) <= chart_config.eps0 * top:
            return _rescale(nu, int(np.argmax(rest)) + 1)
        return nu, chart

    if auto_switch:
        if abs(nu[0]) > chart_config.eps0 * chart_config.normal_hysteresis * top:
            return _rescale(nu, 0)
        best = int(np.argmax(rest)) + 1
        if rest[best - 1] > chart_config.pivot_switch_ratio * abs(nu[chart.index]):
            return _rescale(nu, best)
    elif max(top, abs(nu[0])) > chart_config.alpha_bound:
        raise ChartSingularity(
            f"|alpha| exceeds {chart_config.alpha_bound:g}; the flow left abnormal chart {chart.index}")
    return nu, chart


class _Recorder:
    """Collects oriented samples and converts them to an ExtremalTrajectory."""

    def __init__(self, h: ContactHamiltonian):
        self.h = h
        self.times: List[float] = []
        self.states: List[ContactState] = []
        self.controls: List[np.ndarray] = []
        self.h_values: List[float] = []
        self.orientation: List[float] = []
        self.switch_times: List[float] = []

    def add(self, t: float, xhat: np.ndarray, nu: np.ndarray, chart: OrientedChart) -> None:
        self.times.append(float(t))
        self.states.append(ContactState(xhat.copy(), costate_of(nu, chart)))
        self.controls.append(np.asarray(self.h.control(xhat, nu), dtype=float))
        self.h_values.append(self.h.value(xhat, nu))
        self.orientation.append(chart.orientation)

    def replace_last(self, xhat: np.ndarray, nu: np.ndarray, chart: OrientedChart) -> None:
        """Re-record the newest sample in another chart, keeping its time."""
        t = self.times[-1]
        for samples in (self.times, self.states, self.controls, self.h_values, self.orientation):
            samples.pop()
        self.add(t, xhat, nu, chart)

    def build(self) -> ExtremalTrajectory:
        return ExtremalTrajectory(
            times=np.asarray(self.times),
            states=self.states,
            controls=np.stack(self.controls),
            h_values=np.asarray(self.h_values),
            switch_times=list(self.switch_times),
            orientation=np.asarray(self.orientation),
        )


def _rhs(h: ContactHamiltonian, chart: OrientedChart, size: int):
    def field(t, y):
        dx, dnu = chart_field(h, y[:size], y[size:], chart)
        return np.concatenate((dx, dnu))
    return field


def locate_switch(h: ContactHamiltonian, chart: OrientedChart, t: float, y: np.ndarray,
                  dt: float, u_a: np.ndarray, tol: float) -> float:
    """
    Bisect for the first fraction of [t, t + dt] at which the maximizer
    leaves u_a, stepping with the control frozen at u_a.
    """
    size = y.size // 2
    frozen = _rhs(h.frozen(u_a), chart, size)
    lo, hi = 0.0, 1.0
    while (hi - lo) * abs(dt) > tol:
        mid = 0.5 * (lo + hi)
        y_mid = rk4_step(frozen, t, y, mid * dt)
        if h.control_jump(u_a, h.control(y_mid[:size], y_mid[size:])):
            hi = mid
        else:
            lo = mid
    return hi * dt


def _advance(h: ContactHamiltonian, chart: OrientedChart, t: float, y: np.ndarray, dt: float,
             recorder: _Recorder, auto_switch: bool, tol: float,
             max_switches: int = 8) -> Tuple[np.ndarray, OrientedChart]:
    """One grid step with switch location; intermediate switch samples are recorded."""
    size = y.size // 2
    t_end = t + dt
    for _ in range(max_switches):
        remaining = t_end - t
        y_new = check_finite(rk4_step(_rhs(h, chart, size), t, y, remaining), t_end)
        if not h.switching:
            break
        u_a = h.control(y[:size], y[size:])
        if not h.control_jump(u_a, h.control(y_new[:size], y_new[size:])):
            break
        tau = locate_switch(h, chart, t, y, remaining, u_a, tol)
        y_s = check_finite(rk4_step(_rhs(h.frozen(u_a), chart, size), t, y, tau), t + tau)
        t = t + tau
        recorder.switch_times.append(t)
        logger.debug("Control switch located", time=round(t, 12))
        if abs(t_end - t) <= tol:
            y_new = y_s
            break
        nu, chart = recharted(y_s[size:], chart, auto_switch)
        y = np.concatenate((y_s[:size], nu))
        recorder.add(t, y[:size], y[size:], chart)
    else:
        y_new = check_finite(rk4_step(_rhs(h, chart, size), t, y, t_end - t), t_end)
    nu, chart = recharted(y_new[size:], chart, auto_switch)
    return np.concatenate((y_new[:size], nu)), chart


def _chart_events(chart: OrientedChart, size: int):
    """Terminal solve_ivp events for the chart-selection thresholds."""
    def normal_exit(t, y):
        nu = y[size:]
        return abs(nu[0]) - chart_config.eps0 * np.max(np.abs(nu[1:]))

    def normal_entry(t, y):
        nu = y[size:]
        return chart_config.eps0 * chart_config.normal_hysteresis * np.max(np.abs(nu[1:])) - abs(nu[0])

    def pivot_exit(t, y):
        nu = y[size:]
        return chart_config.pivot_switch_ratio * abs(nu[chart.index]) - np.max(np.abs(nu[1:]))

    events = [normal_exit] if chart.is_normal else [normal_entry, pivot_exit]
    for event in events:
        event.terminal = True
    return events


def integrate_contact(h: ContactHamiltonian, s0: ContactState, t_a: float, t_b: float,
                      step: float = None, method: str = None,
                      auto_switch: Optional[bool] = None,
                      chart: Optional[OrientedChart] = None) -> ExtremalTrajectory:
    """
    Integrate X_h from s0 over [t_a, t_b] (either direction).

    Fixed-step RK4 by default, adaptive RK45 with method="rk45". Charts are
    switched automatically when the selection thresholds fire, which by
    default is enabled only for homogeneous Hamiltonians. `chart` overrides
    the starting orientation of s0.
    """
    if t_a == t_b:
        raise ValidationError("Integration span is degenerate", field="span")
    method = method or integrator_config.method
    auto_switch = h.homogeneous if auto_switch is None else auto_switch
    tol = integrator_config.switch_time_tol
    chart = chart or OrientedChart.of(s0.costate)
    if chart.tag() != s0.costate.chart:
        raise ValidationError(f"Starting chart {chart.tag().label()} does not match "
                              f"{s0.costate.chart.label()}", field="chart")
    size = s0.n + 1

    nu = s0.costate.homogeneous() * chart.orientation
    nu, chart = recharted(nu, chart, auto_switch)
    y = np.concatenate((s0.xhat, nu))

    recorder = _Recorder(h)
    recorder.add(t_a, y[:size], y[size:], chart)

    if method == "rk4":
        grid = uniform_grid(t_a, t_b, integrator_config.step if step is None else step)
        for i in range(grid.size - 1):
            y_next, chart = _advance(h, chart, grid[i], y, grid[i + 1] - grid[i], recorder, auto_switch, tol)
            y = y_next
            recorder.add(grid[i + 1], y[:size], y[size:], chart)
    elif method == "rk45":
        t = t_a
        max_step = np.inf if step is None else step
        while t != t_b:
            events = _chart_events(chart, size) if auto_switch else None
            sol = integrate_adaptive(_rhs(h, chart, size), y, t, t_b, events=events, max_step=max_step)
            for j in range(1, sol.t.size):
                recorder.add(sol.t[j], sol.y[:size, j], sol.y[size:, j], chart)
            t = float(sol.t[-1])
            y = sol.y[:, -1].copy()
            if sol.status == 1:
                nu, new_chart = recharted(y[size:], chart, auto_switch)
                if new_chart == chart:
                    # event fired on a boundary the thresholds do not act on yet
                    nu, new_chart = _rescale(y[size:], int(np.argmax(np.abs(y[size:]))))
                y = np.concatenate((y[:size], nu))
                chart = new_chart
                recorder.replace_last(y[:size], y[size:], chart)
        _mark_switches(h, recorder, tol)
    else:
        raise ValidationError(f"Unknown integration method '{method}'", field="method")

    trajectory = recorder.build()
    logger.debug("Contact flow integrated", samples=len(trajectory),
                 switches=len(trajectory.switch_times), final_chart=trajectory.final.costate.chart.label())
    return trajectory


def _mark_switches(h: ContactHamiltonian, recorder: _Recorder, tol: float) -> None:
    """Locate switch times between adaptive samples without inserting samples."""
    if not h.switching:
        return
    for i in range(len(recorder.times) - 1):
        u_a, u_b = recorder.controls[i], recorder.controls[i + 1]
        if not h.control_jump(u_a, u_b):
            continue
        t = recorder.times[i]
        dt = recorder.times[i + 1] - t
        if dt == 0:
            continue
        state = recorder.states[i]
        chart = OrientedChart.oriented(state.costate, recorder.orientation[i])
        nu = state.costate.homogeneous() * recorder.orientation[i]
        y = np.concatenate((state.xhat, nu))
        recorder.switch_times.append(t + locate_switch(h, chart, t, y, dt, u_a, tol))


def trajectory_costates(trajectory: ExtremalTrajectory) -> List[np.ndarray]:
    """Oriented homogeneous covectors along a trajectory."""
    return [s.costate.homogeneous() * k for s, k in zip(trajectory.states, trajectory.orientation)]


def state_of(trajectory: ExtremalTrajectory, index: int) -> Tuple[np.ndarray, np.ndarray]:
    """(xhat, oriented nuhat) of one sample."""
    s = trajectory.states[index]
    return s.xhat, s.costate.homogeneous() * trajectory.orientation[index]


__all__ = [
    "ContactHamiltonian",
    "OrientedChart",
    "costate_of",
    "chart_field",
    "contact_form",
    "reeb_field",
    "two_form",
    "contact_vector_field",
    "contact_vector_field_abnormal",
    "defining_relation_defects",
    "symplectic_lift_field",
    "integrate_symplectic",
    "recharted",
    "locate_switch",
    "integrate_contact",
    "trajectory_costates",
    "state_of",
]
