"""
Indirect shooting.

Unknowns are the initial chart costate, the terminal time when it is free
and transversality multipliers c (lambda1 = Dg(x1)^T c). The residual stacks
the target constraint g(x1), the transversality block (terminal-cost form
when K is present) and, for free terminal time, h(t1) = 0. Roots are found
by damped Newton with a forward-difference Jacobian; abnormal charts are
tried when the normal chart fails. Terminal costs are handled by the
contact transformation Psi_K, or equivalently by folding K into L.
"""

from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.contact import OrientedChart, integrate_contact, state_of, trajectory_costates
from core.differentiation import forward_jacobian
from core.hamiltonian import OptimalContactHamiltonian, batch_control_hamiltonian
from core.projective import chart_from_vector
from core.propagation import pairing_defect, propagate_adjoint, propagate_tangent, state_trajectory
from models.costate import ChartTag, ProjectiveCostate
from models.problem import BoxControlSet, OcpProblem, TerminalCost
from models.trajectory import ContactState, ExtremalTrajectory
from utils.error_handlers import (
    ChartSingularity,
    ErrorContext,
    EvaluationFailure,
    InvalidUnknowns,
    NoConvergence,
    RankDeficient,
    StepFailure,
    ValidationError,
)
from utils.logger import get_logger, log_performance
from utils.performance_optimizer import parallel_map
from utils.settings import integrator_config, maximizer_config, shooting_config

logger = get_logger(__name__)

# Failures that reject a Newton trial point instead of aborting the solve
TRIAL_FAILURES = (ChartSingularity, StepFailure, InvalidUnknowns, EvaluationFailure)


@dataclass(frozen=True)
class ShootingUnknowns:
    """Initial chart costate, terminal time (free mode only) and multipliers c."""

    costate: ProjectiveCostate
    t1: Optional[float] = None
    c: np.ndarray = field(default_factory=lambda: np.zeros(0))
    orientation: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float).reshape(-1))
        if self.orientation not in (1.0, -1.0):
            raise ValidationError("Orientation must be +1 or -1", field="orientation")

    @classmethod
    def normal(cls, lam0: Sequence[float], t1: Optional[float] = None,
               c: Sequence[float] = ()) -> 'ShootingUnknowns':
        return cls(ProjectiveCostate.normal(lam0), t1, np.asarray(c, dtype=float))

    @property
    def chart(self) -> ChartTag:
        return self.costate.chart

    def to_vector(self) -> np.ndarray:
        """Free coordinates: lambda0 (or alpha0 without the pivot entry), t1, c."""
        coords = self.costate.coords
        if not self.costate.is_normal:
            coords = np.delete(coords, self.costate.pivot - 1)
        head = [coords]
        if self.t1 is not None:
            head.append([self.t1])
        head.append(self.c)
        return np.concatenate(head)

    def with_vector(self, z: np.ndarray) -> 'ShootingUnknowns':
        """Same chart and layout, new free coordinates."""
        z = np.asarray(z, dtype=float)
        n = self.costate.n
        if self.costate.is_normal:
            costate, rest = ProjectiveCostate.normal(z[:n]), z[n:]
        else:
            a = self.costate.pivot
            alpha = np.insert(z[:n - 1], a - 1, 1.0)
            costate, rest = ProjectiveCostate.abnormal(a, alpha), z[n - 1:]
        if self.t1 is not None:
            return replace(self, costate=costate, t1=float(rest[0]), c=rest[1:])
        return replace(self, costate=costate, c=rest)

    def to_dict(self) -> Dict[str, Any]:
        data = {"costate": self.costate.to_dict(), "c": self.c.tolist(), "orientation": self.orientation}
        if self.t1 is not None:
            data["t1"] = self.t1
        return data


@dataclass
class ShootingOptions:
    """Newton and integration settings for one solve."""

    tol: float = shooting_config.tol
    max_iter: int = shooting_config.max_iter
    max_halvings: int = shooting_config.max_halvings
    fd_rel_step: float = shooting_config.fd_rel_step
    armijo: float = shooting_config.armijo
    step: float = integrator_config.step
    method: str = integrator_config.method
    chart: str = "auto"
    retry_abnormal: bool = shooting_config.retry_abnormal

    def __post_init__(self):
        for name in ("tol", "fd_rel_step", "step"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive", field=name)
        if self.max_iter < 1:
            raise ValidationError("max_iter must be at least 1", field="max_iter")
        if self.chart not in ("normal", "abnormal", "auto"):
            raise ValidationError(f"Unknown chart policy '{self.chart}'", field="chart")


@dataclass
class ShootingResult:
    """Outcome of one Newton solve."""

    converged: bool
    trajectory: Optional[ExtremalTrajectory]
    unknowns: ShootingUnknowns
    residual: np.ndarray
    residual_blocks: Dict[str, float]
    classification: str
    iterations: int
    residual_history: List[float] = field(default_factory=list)
    cost: float = float("nan")
    start_index: int = 0

    @property
    def residual_norm(self) -> float:
        return float(np.max(np.abs(self.residual))) if self.residual.size else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "converged": self.converged,
            "classification": self.classification,
            "iterations": self.iterations,
            "unknowns": self.unknowns.to_dict(),
            "residual": self.residual.tolist(),
            "residual_blocks": dict(sorted(self.residual_blocks.items())),
            "residual_norm": self.residual_norm,
            "residual_history": list(self.residual_history),
            "cost": self.cost,
            "t1": self.trajectory.t1 if self.trajectory is not None else None,
            "switch_times": list(self.trajectory.switch_times) if self.trajectory is not None else [],
        }


# -- transversality ----------------------------------------------------

def _constraint_jacobian(p: OcpProblem, x1: np.ndarray) -> np.ndarray:
    dg = p.target.dg(x1)
    if p.target.k > 0 and np.linalg.matrix_rank(dg) < p.target.k:
        raise RankDeficient(f"Target Jacobian lost rank at x1={np.asarray(x1).tolist()}")
    return dg


def transversality_residual(lam1: Sequence[float], x1: Sequence[float], p: OcpProblem,
                            c: Sequence[float]) -> np.ndarray:
    """lambda1 - Dg(x1)^T c; zero iff lambda1 is normal to the target at x1."""
    x1 = np.asarray(x1, dtype=float)
    dg = _constraint_jacobian(p, x1)
    return np.asarray(lam1, dtype=float) - dg.T @ np.asarray(c, dtype=float).reshape(p.target.k)


def terminal_cost_transversality_residual(mu1: Sequence[float], x1: Sequence[float], p: OcpProblem,
                                          c: Sequence[float]) -> np.ndarray:
    """mu1 + dK(x1) - Dg(x1)^T c."""
    x1 = np.asarray(x1, dtype=float)
    return transversality_residual(np.asarray(mu1, dtype=float) + p.dK(x1), x1, p, c)


# -- terminal-cost contact transformation -------------------------------

def _terminal_cost(K: Union[TerminalCost, OcpProblem, None]) -> TerminalCost:
    if isinstance(K, OcpProblem):
        K = K.terminal_cost
    return TerminalCost.zero() if K is None else K


def phi_k(K: Union[TerminalCost, OcpProblem, None], x0: float, x: Sequence[float]) -> Tuple[float, np.ndarray]:
    """Phi_K(x0, x) = (x0 - K(x), x); Phi_{-K} is its inverse."""
    K = _terminal_cost(K)
    x = np.asarray(x, dtype=float)
    return float(x0 - K(x)), x


def psi_k(K: Union[TerminalCost, OcpProblem, None], y0: float, y: Sequence[float],
          mu: Sequence[float]) -> Tuple[float, np.ndarray, np.ndarray]:
    """Psi_K(y0, y, mu) = (y0 + K(y), y, mu + dK(y))."""
    K = _terminal_cost(K)
    y = np.asarray(y, dtype=float)
    return float(y0 + K(y)), y, np.asarray(mu, dtype=float) + K.grad(y)


def fold_terminal_cost(p: OcpProblem, argmax=None) -> OcpProblem:
    """
    Equivalent problem without terminal cost: L' = L + dK . f.

    Its x0 accumulates K(x) - K(x(t0)) + int L. When p supplies an analytic
    argmax it is reused, since nu . f + nu0 (L + dK . f) is the original
    control Hamiltonian at (nu0, nu + nu0 dK).
    """
    if not p.has_terminal_cost:
        return p
    K = p.terminal_cost

    def running_cost(x, u):
        return p.L(x, u) + float(K.grad(x) @ p.f(x, u))

    def cost_gradient(x, u):
        f = p.f(x, u)
        return p.L_x(x, u) + K.hess(x) @ f + p.f_x(x, u).T @ K.grad(x)

    if argmax is None and p.argmax is not None:
        def argmax(x, nu):
            shifted = np.asarray(nu, dtype=float).copy()
            shifted[1:] = shifted[1:] + shifted[0] * K.grad(x)
            return p.argmax(x, shifted)

    return replace(
        p,
        name=f"{p.name}_folded",
        running_cost=running_cost,
        cost_gradient=cost_gradient,
        terminal_cost=None,
        argmax=argmax,
        vectorized=False,
        description=f"{p.name} with its terminal cost folded into the running cost",
    )


def map_costate_trajectory(p: Union[OcpProblem, TerminalCost], trajectory: ExtremalTrajectory) -> ExtremalTrajectory:
    """Apply Psi_K sample by sample: (y0, y, [nu0 : mu]) -> (y0 + K, y, [nu0 : mu - nu0 dK])."""
    K = _terminal_cost(p)
    states = []
    orientation = []
    for state, nu in zip(trajectory.states, trajectory_costates(trajectory)):
        y = state.x
        mapped = nu.copy()
        mapped[1:] = nu[1:] - nu[0] * K.grad(y)
        xhat = np.concatenate(([state.x0 + K(y)], y))
        costate = chart_from_vector(mapped, state.costate.chart)
        states.append(ContactState(xhat, costate))
        pinned = 0 if costate.is_normal else costate.pivot
        orientation.append(float(np.sign(mapped[pinned] / costate.homogeneous()[pinned])))
    return ExtremalTrajectory(
        times=trajectory.times.copy(),
        states=states,
        controls=trajectory.controls.copy(),
        h_values=trajectory.h_values.copy(),
        switch_times=list(trajectory.switch_times),
        orientation=np.asarray(orientation),
    )


# -- residual ----------------------------------------------------------

def _terminal_time(p: OcpProblem, z: ShootingUnknowns) -> float:
    if p.time_mode.is_free:
        if z.t1 is None:
            raise InvalidUnknowns("Free terminal time needs t1 among the unknowns")
        t1 = z.t1
    else:
        t1 = p.time_mode.t1
    if not np.isfinite(t1) or not t1 > p.t0:
        raise InvalidUnknowns(f"Terminal time t1={t1} must exceed t0={p.t0}")
    return float(t1)


def _check_dimensions(p: OcpProblem, z: ShootingUnknowns) -> None:
    if z.costate.n != p.n:
        raise ValidationError(f"Costate has {z.costate.n} coordinates, problem has n={p.n}", field="costate")
    if z.c.size != p.target.k:
        raise ValidationError(f"Expected {p.target.k} multipliers, got {z.c.size}", field="c")
    if p.time_mode.is_free != (z.t1 is not None):
        raise ValidationError("t1 must be an unknown exactly when the terminal time is free", field="t1")
    if not (np.all(np.isfinite(z.to_vector()))):
        raise InvalidUnknowns("Shooting unknowns must be finite")


def integrate_extremal(p: OcpProblem, z: ShootingUnknowns,
                       opts: Optional[ShootingOptions] = None) -> ExtremalTrajectory:
    """Flow of the optimal contact Hamiltonian from ((0, x0), costate) to t1."""
    opts = opts or ShootingOptions()
    t1 = _terminal_time(p, z)
    s0 = ContactState(np.concatenate(([0.0], p.x0)), z.costate)
    chart = OrientedChart.oriented(z.costate, 1.0 if z.costate.is_normal else z.orientation)
    return integrate_contact(OptimalContactHamiltonian(p), s0, p.t0, t1,
                             step=opts.step, method=opts.method, auto_switch=True, chart=chart)


def residual_blocks(p: OcpProblem, z: ShootingUnknowns,
                    trajectory: ExtremalTrajectory) -> Dict[str, np.ndarray]:
    """Target, transversality and (free time) Hamiltonian blocks at t1."""
    xhat1, nu1 = state_of(trajectory, -1)
    x1 = xhat1[1:]
    blocks = {"target": p.target.value(x1)}
    lam1 = nu1[1:] - nu1[0] * p.dK(x1) if p.has_terminal_cost else nu1[1:]
    blocks["transversality"] = transversality_residual(lam1, x1, p, z.c)
    if p.time_mode.is_free:
        blocks["free_time"] = np.array([trajectory.h_values[-1]])
    return blocks


def shooting_residual(p: OcpProblem, z: ShootingUnknowns,
                      opts: Optional[ShootingOptions] = None) -> np.ndarray:
    """Stacked boundary residual; k + n (+1) entries."""
    _check_dimensions(p, z)
    trajectory = integrate_extremal(p, z, opts)
    return np.concatenate(list(residual_blocks(p, z, trajectory).values()))


def _evaluate(p: OcpProblem, z: ShootingUnknowns, opts: ShootingOptions):
    trajectory = integrate_extremal(p, z, opts)
    blocks = residual_blocks(p, z, trajectory)
    return np.concatenate(list(blocks.values())), blocks, trajectory


def total_cost(p: OcpProblem, trajectory: ExtremalTrajectory) -> float:
    """x0(t1) + K(x1)."""
    xhat1 = trajectory.final.xhat
    return float(xhat1[0] + p.K(xhat1[1:]))


def _classification(z: ShootingUnknowns) -> str:
    return "normal" if z.costate.is_normal else "abnormal"


# -- Newton ------------------------------------------------------------

def _newton(p: OcpProblem, z0: ShootingUnknowns, opts: ShootingOptions) -> ShootingResult:
    """Damped (Gauss-)Newton on the free coordinates of z0's chart."""
    label = z0.chart.label()
    z = z0.to_vector()
    history: List[float] = []

    try:
        r, blocks, trajectory = _evaluate(p, z0, opts)
    except TRIAL_FAILURES as e:
        raise NoConvergence(f"Initial guess not integrable in chart {label}: {e.message}",
                            best_iterate=z0, residual_history=history,
                            context=ErrorContext(operation="shoot", problem=p.name))

    def residual_of(vector):
        return _evaluate(p, z0.with_vector(vector), opts)[0]

    iteration = 0
    for iteration in range(opts.max_iter + 1):
        norm_inf = float(np.max(np.abs(r))) if r.size else 0.0
        history.append(norm_inf)
        logger.log_solver_iteration("newton", iteration, chart=label, residual=f"{norm_inf:.3e}")
        if norm_inf <= opts.tol:
            unknowns = z0.with_vector(z)
            return ShootingResult(
                converged=True, trajectory=trajectory, unknowns=unknowns, residual=r,
                residual_blocks={k: float(np.max(np.abs(v))) if v.size else 0.0 for k, v in blocks.items()},
                classification=_classification(unknowns), iterations=iteration,
                residual_history=history, cost=total_cost(p, trajectory))
        if iteration == opts.max_iter:
            break

        J = forward_jacobian(residual_of, z, r, opts.fd_rel_step, retry_on=TRIAL_FAILURES)
        dz = np.linalg.lstsq(J, -r, rcond=None)[0]
        merit = np.linalg.norm(r)
        predicted = merit - np.linalg.norm(r + J @ dz)

        alpha = 1.0
        accepted = False
        for _ in range(opts.max_halvings + 1):
            trial = z + alpha * dz
            try:
                r_trial, blocks_trial, traj_trial = _evaluate(p, z0.with_vector(trial), opts)
            except TRIAL_FAILURES:
                alpha *= 0.5
                continue
            if np.linalg.norm(r_trial) <= merit - opts.armijo * alpha * predicted and \
                    np.linalg.norm(r_trial) < merit:
                z, r, blocks, trajectory = trial, r_trial, blocks_trial, traj_trial
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            logger.debug("Line search stalled", chart=label, iteration=iteration)
            break

    unknowns = z0.with_vector(z)
    result = ShootingResult(
        converged=False, trajectory=trajectory, unknowns=unknowns, residual=r,
        residual_blocks={k: float(np.max(np.abs(v))) if v.size else 0.0 for k, v in blocks.items()},
        classification=_classification(unknowns), iterations=iteration,
        residual_history=history, cost=total_cost(p, trajectory))
    raise NoConvergence(
        f"Newton did not reach {opts.tol:g} in chart {label} (residual {history[-1]:.3e})",
        best_iterate=unknowns, residual_history=history, result=result,
        context=ErrorContext(operation="shoot", problem=p.name))


def abnormal_guesses(z: ShootingUnknowns) -> List[ShootingUnknowns]:
    """Abnormal starts a = 1..n, both orientations, seeded from z's costate."""
    vec = z.costate.homogeneous()[1:]
    guesses = []
    for a in range(1, z.costate.n + 1):
        if vec[a - 1] != 0:
            alpha = vec / vec[a - 1]
            first = np.sign(vec[a - 1])
        else:
            alpha = np.zeros_like(vec)
            alpha[a - 1] = 1.0
            first = 1.0
        for sign in (first, -first):
            guesses.append(replace(z, costate=ProjectiveCostate.abnormal(a, alpha), orientation=float(sign)))
    return guesses


@log_performance("shoot.solve")
def solve(p: OcpProblem, z_init: ShootingUnknowns, opts: Optional[ShootingOptions] = None) -> ShootingResult:
    """
    Solve the shooting equations from z_init.

    Chart policy: "normal" tries z_init only; "abnormal" tries abnormal charts
    a = 1..n; "auto" tries the normal chart first and, when
    opts.retry_abnormal is set, falls back to abnormal charts. Raises
    NoConvergence carrying the best attempt.
    """
    opts = opts or ShootingOptions()
    _check_dimensions(p, z_init)

    attempts: List[ShootingUnknowns] = []
    if opts.chart in ("normal", "auto"):
        attempts.append(z_init if z_init.costate.is_normal else replace(
            z_init, costate=ProjectiveCostate.normal(z_init.costate.coords)))
    if opts.chart == "abnormal" or (opts.chart == "auto" and opts.retry_abnormal):
        attempts += abnormal_guesses(z_init)

    best: Optional[NoConvergence] = None
    for attempt in attempts:
        try:
            result = _newton(p, attempt, opts)
            logger.info("Shooting converged", problem=p.name, chart=attempt.chart.label(),
                        iterations=result.iterations)
            return result
        except NoConvergence as e:
            logger.debug("Shooting attempt failed", chart=attempt.chart.label(), reason=e.message)
            final = e.residual_history[-1] if e.residual_history else np.inf
            best_final = best.residual_history[-1] if best is not None and best.residual_history else np.inf
            if best is None or final < best_final:
                best = e

    raise NoConvergence(
        f"Shooting failed for '{p.name}' in every tried chart: {best.message}",
        best_iterate=best.best_iterate, residual_history=best.residual_history, result=best.result,
        context=ErrorContext(operation="shoot", problem=p.name))


def default_starts(p: OcpProblem, z_init: ShootingUnknowns, count: int, seed: int = 0) -> List[ShootingUnknowns]:
    """z_init followed by count - 1 seeded random normal-chart costates."""
    rng = np.random.default_rng(seed)
    scale = max(1.0, float(np.max(np.abs(z_init.costate.coords))))
    starts = [z_init]
    for _ in range(max(0, count - 1)):
        starts.append(replace(z_init, costate=ProjectiveCostate.normal(scale * rng.standard_normal(p.n))))
    return starts


def solve_multistart(p: OcpProblem, starts: Sequence[ShootingUnknowns],
                     opts: Optional[ShootingOptions] = None) -> List[ShootingResult]:
    """
    Independent solves in parallel; every converged result ordered by
    (cost, start index). Raises NoConvergence when none converges.
    """
    opts = opts or ShootingOptions()

    def attempt(item):
        index, start = item
        try:
            result = solve(p, start, opts)
            result.start_index = index
            return result
        except NoConvergence as e:
            return e

    outcomes = parallel_map(attempt, list(enumerate(starts)))
    converged = [o for o in outcomes if isinstance(o, ShootingResult)]
    logger.info("Multi-start finished", problem=p.name, starts=len(outcomes), converged=len(converged))
    if not converged:
        failures = [o for o in outcomes if isinstance(o, NoConvergence)]
        best = min(failures, key=lambda e: e.residual_history[-1] if e.residual_history else np.inf)
        raise NoConvergence(f"No multi-start run converged for '{p.name}'",
                            best_iterate=best.best_iterate, residual_history=best.residual_history,
                            result=best.result, context=ErrorContext(operation="multistart", problem=p.name))
    return sorted(converged, key=lambda r: (r.cost, r.start_index))


# -- diagnostics -------------------------------------------------------

def _verification_controls(p: OcpProblem) -> np.ndarray:
    U = p.control_set
    if isinstance(U, BoxControlSet):
        return U.grid(maximizer_config.verification_points)
    return U.grid(0)


def verify_extremal(p: OcpProblem, result: ShootingResult) -> Dict[str, Any]:
    """
    Recompute necessary conditions along a solved extremal.

    Returns max-principle defect over the verification grid of U, pairing
    defect over the basis perturbations e0..en, the nu0 <= 0 check,
    transversality defects (plain and terminal-cost), terminal h (free time)
    and the spread of h along the trajectory.
    """
    trajectory = result.trajectory
    costates = trajectory_costates(trajectory)
    grid = _verification_controls(p)

    max_defect = 0.0
    for state, nu, u in zip(trajectory.states, costates, trajectory.controls):
        values = batch_control_hamiltonian(p, state.x, nu, grid)
        at_u = float(nu @ p.fhat(state.xhat, u))
        max_defect = max(max_defect, float(np.max(values)) - at_u)

    states = state_trajectory(trajectory)
    signal = trajectory.control_signal()
    adjoint = propagate_adjoint(p, states, signal, costates[-1])
    basis = list(np.eye(p.n + 1))
    defects = parallel_map(lambda e: pairing_defect(adjoint, propagate_tangent(p, states, signal, e)), basis)

    xhat1, nu1 = state_of(trajectory, -1)
    x1 = xhat1[1:]
    plain = transversality_residual(nu1[1:], x1, p, result.unknowns.c)
    with_cost = transversality_residual(nu1[1:] - nu1[0] * p.dK(x1), x1, p, result.unknowns.c)

    diagnostics = {
        "max_principle_defect": max(0.0, max_defect),
        "pairing_defect": float(max(defects)),
        "nu0_sign_ok": bool(all(nu[0] <= 0 for nu in costates)),
        "transversality_defect": float(np.max(np.abs(plain))),
        "terminal_cost_transversality_defect": float(np.max(np.abs(with_cost))),
        "target_defect": float(np.max(np.abs(p.target.value(x1)))) if p.target.k else 0.0,
        "hamiltonian_variation": float(np.max(trajectory.h_values) - np.min(trajectory.h_values)),
        "adjoint_nu0_drift": float(np.max(np.abs(adjoint.values[:, 0] - adjoint.values[-1, 0]))),
    }
    if p.time_mode.is_free:
        diagnostics["terminal_h_defect"] = float(abs(trajectory.h_values[-1]))
    trajectory.diagnostics.update(diagnostics)
    return diagnostics


__all__ = [
    "TRIAL_FAILURES",
    "ShootingUnknowns",
    "ShootingOptions",
    "ShootingResult",
    "transversality_residual",
    "terminal_cost_transversality_residual",
    "phi_k",
    "psi_k",
    "fold_terminal_cost",
    "map_costate_trajectory",
    "integrate_extremal",
    "residual_blocks",
    "shooting_residual",
    "total_cost",
    "abnormal_guesses",
    "solve",
    "default_starts",
    "solve_multistart",
    "verify_extremal",
]
