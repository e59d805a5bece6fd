"""
Exhaustive direct-discretization oracle.

Enumerates every piecewise-constant schedule with N intervals and values on
the per-axis G-grid of U (or the points of a finite U), and every terminal
time on the supplied grid when the terminal time is free. Costs are
x0(t1) + K(x1) + rho * |g(x1)|^2. The search is never sampled; the minimum
is unique up to the fixed tie-break (time index, then lexicographic
schedule index).
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.integrators import rk4_step
from models.problem import BoxControlSet, OcpProblem
from models.trajectory import ControlSignal
from utils.error_handlers import BudgetExceeded, ErrorContext, ValidationError
from utils.logger import get_logger, log_performance
from utils.performance_optimizer import parallel_map
from utils.settings import oracle_config

logger = get_logger(__name__)


@dataclass(frozen=True)
class OracleResult:
    """Best schedule found by the exhaustive search."""

    cost: float
    t1: float
    controls: np.ndarray
    indices: Tuple[int, ...]
    penalty: float
    evaluated: int

    def control_signal(self, t0: float) -> ControlSignal:
        breakpoints = np.linspace(t0, self.t1, self.controls.shape[0] + 1)
        return ControlSignal(breakpoints, self.controls)

    def to_dict(self) -> Dict[str, object]:
        return {
            "cost": self.cost,
            "t1": self.t1,
            "controls": self.controls.tolist(),
            "indices": list(self.indices),
            "penalty": self.penalty,
            "evaluated": self.evaluated,
        }


def control_values(p: OcpProblem, grid_points: int) -> np.ndarray:
    """Candidate control values, shape (K, m), lexicographic order."""
    if isinstance(p.control_set, BoxControlSet):
        if grid_points < 1:
            raise ValidationError("Oracle grid needs at least one point per axis", field="G")
        return p.control_set.grid(grid_points)
    return p.control_set.grid(0)


def _terminal_times(p: OcpProblem, time_grid: Optional[Sequence[float]]) -> np.ndarray:
    if not p.time_mode.is_free:
        return np.array([p.time_mode.t1])
    if time_grid is None or len(time_grid) == 0:
        raise ValidationError("Free terminal time needs a terminal-time grid", field="time_grid")
    times = np.asarray(time_grid, dtype=float).reshape(-1)
    if np.any(times <= p.t0):
        raise ValidationError("Terminal-time grid must lie after t0", field="time_grid")
    return times


def _batched_fhat(p: OcpProblem, xhat: np.ndarray, u: np.ndarray) -> np.ndarray:
    x = xhat[:, 1:]
    if p.vectorized:
        L = np.broadcast_to(np.asarray(p.running_cost(x, u), dtype=float), (x.shape[0],))
        F = np.asarray(p.dynamics(x, u), dtype=float).reshape(x.shape)
        return np.concatenate((L[:, None], F), axis=1)
    return np.stack([np.concatenate(([p.L(xi, ui)], p.f(xi, ui))) for xi, ui in zip(x, u)])


def _simulate(p: OcpProblem, schedules: np.ndarray, t1: float, substeps: int) -> np.ndarray:
    """Shared RK4 step applied to a batch of schedules, shape (B, N, m) -> (B, n+1)."""
    batch, intervals, _ = schedules.shape
    h = (t1 - p.t0) / (intervals * substeps)
    xhat = np.zeros((batch, p.n + 1))
    xhat[:, 1:] = p.x0
    t = p.t0

    def field(_, y):
        return _batched_fhat(p, y, u)

    with np.errstate(all="ignore"):
        for j in range(intervals):
            u = schedules[:, j, :]
            for _ in range(substeps):
                xhat = rk4_step(field, t, xhat, h)
                t += h
    return xhat


def _terminal_costs(p: OcpProblem, xhat1: np.ndarray, penalty: float) -> Tuple[np.ndarray, np.ndarray]:
    """Total cost and penalty term per row; non-finite rows cost +inf."""
    cost = xhat1[:, 0].copy()
    pen = np.zeros(xhat1.shape[0])
    for i, x1 in enumerate(xhat1[:, 1:]):
        if not np.all(np.isfinite(x1)):
            cost[i] = np.inf
            continue
        if p.has_terminal_cost:
            cost[i] += p.K(x1)
        if p.target.k:
            g = p.target.value(x1)
            pen[i] = penalty * float(g @ g)
    cost = cost + pen
    cost[~np.isfinite(cost)] = np.inf
    return cost, pen


@log_performance("bench.direct_oracle")
def direct_oracle(p: OcpProblem, N: int, G: int, time_grid: Optional[Sequence[float]] = None,
                  substeps: Optional[int] = None, penalty: Optional[float] = None,
                  budget: Optional[int] = None) -> OracleResult:
    """
    Exhaustive minimum over piecewise-constant schedules.

    Raises BudgetExceeded when (values per interval)^N * |time grid| is
    above the budget.
    """
    if N < 1:
        raise ValidationError("Oracle needs at least one interval", field="N")
    substeps = oracle_config.substeps if substeps is None else substeps
    penalty = oracle_config.penalty if penalty is None else penalty
    budget = oracle_config.budget if budget is None else budget

    values = control_values(p, G)
    times = _terminal_times(p, time_grid)
    per_time = values.shape[0] ** N
    total = per_time * times.size
    if total > budget:
        raise BudgetExceeded(
            f"Oracle would evaluate {total} schedules (budget {budget})",
            context=ErrorContext(operation="direct_oracle", problem=p.name,
                                 additional_data={"N": N, "G": G, "times": int(times.size)}))

    chunk = max(1, oracle_config.chunk_size)
    jobs: List[Tuple[int, int, int]] = [
        (ti, start, min(start + chunk, per_time))
        for ti in range(times.size)
        for start in range(0, per_time, chunk)
    ]
    shape = (values.shape[0],) * N

    def evaluate(job):
        ti, start, stop = job
        flat = np.arange(start, stop)
        idx = np.stack(np.unravel_index(flat, shape), axis=1)
        xhat1 = _simulate(p, values[idx], times[ti], substeps)
        cost, pen = _terminal_costs(p, xhat1, penalty)
        best = int(np.argmin(cost))
        return float(cost[best]), ti, start + best, float(pen[best])

    outcomes = parallel_map(evaluate, jobs)

    best_cost, best_time, best_flat, best_pen = np.inf, 0, 0, 0.0
    for cost, ti, flat, pen in outcomes:
        if cost < best_cost:
            best_cost, best_time, best_flat, best_pen = cost, ti, flat, pen

    indices = tuple(int(i) for i in np.unravel_index(best_flat, shape))
    result = OracleResult(
        cost=best_cost,
        t1=float(times[best_time]),
        controls=values[list(indices)],
        indices=indices,
        penalty=best_pen,
        evaluated=total,
    )
    logger.info("Direct oracle finished", problem=p.name, cost=f"{best_cost:.6g}", t1=result.t1,
                evaluated=total)
    return result


__all__ = [
    "OracleResult",
    "control_values",
    "direct_oracle",
]
