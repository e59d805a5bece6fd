"""
Invariant suites run by `verify`.

Each suite draws seeded random instances, measures the worst defect of one
structural property and compares it to a fixed tolerance.
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from bench.catalog import get_case
from bench.registry import linear_quadratic
from core.contact import ContactHamiltonian, OrientedChart, integrate_contact, integrate_symplectic, trajectory_costates
from core.hamiltonian import control_hamiltonian, optimal_contact_hamiltonian
from core.projective import from_vector, representative, switch_chart
from core.propagation import integrate_extended, pairing_defect, propagate_adjoint, propagate_tangent
from core.shooting import (
    ShootingOptions,
    ShootingUnknowns,
    fold_terminal_cost,
    map_costate_trajectory,
    psi_k,
    solve,
)
from models.costate import ChartTag
from models.problem import BoxControlSet, OcpProblem, TargetSet, TerminalCost, TimeMode
from models.trajectory import ContactState, ControlSignal
from utils.error_handlers import ValidationError
from utils.logger import get_logger, log_performance
from utils.settings import AppConstants

logger = get_logger(__name__)


@dataclass
class SuiteResult:
    """Outcome of one invariant suite."""

    name: str
    passed: bool
    defect: float
    tolerance: float
    samples: int
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "defect": self.defect,
            "tolerance": self.tolerance,
            "samples": self.samples,
            "details": dict(sorted(self.details.items())),
        }


def _result(name: str, defect: float, tolerance: float, samples: int, **details) -> SuiteResult:
    required = bool(details.pop("required", True))
    passed = bool(np.isfinite(defect) and defect <= tolerance) and required
    result = SuiteResult(name, passed, float(defect), tolerance, samples, details)
    logger.info("Suite finished", suite=name, passed=passed, defect=f"{defect:.3e}", tolerance=tolerance)
    return result


def _direction_gap(u: np.ndarray, v: np.ndarray) -> float:
    """Distance between projective points given by representatives, sign-blind."""
    u = u / np.linalg.norm(u)
    v = v / np.linalg.norm(v)
    return float(min(np.linalg.norm(u - v), np.linalg.norm(u + v)))


def random_linear_problem(rng: np.random.Generator, n: int, m: int, t1: float = 1.0) -> OcpProblem:
    """x' = A x + B u with quadratic cost, box U = [-1, 1]^m, free endpoint at fixed t1."""
    Q = rng.standard_normal((n, n))
    spec = linear_quadratic({
        "A": rng.standard_normal((n, n)).tolist(),
        "B": rng.standard_normal((n, m)).tolist(),
        "Q": (Q @ Q.T / n).tolist(),
        "r": rng.uniform(0.5, 2.0, m).tolist(),
    })
    control_set = BoxControlSet(-np.ones(m), np.ones(m))
    return OcpProblem(
        name=f"random_linear_{n}x{m}",
        n=n,
        m=m,
        dynamics=spec.dynamics,
        running_cost=spec.running_cost,
        control_set=control_set,
        x0=rng.standard_normal(n),
        target=TargetSet.free(),
        time_mode=TimeMode.fixed(t1),
        dynamics_jacobian=spec.dynamics_jacobian,
        cost_gradient=spec.cost_gradient,
        argmax=spec.argmax_for(control_set),
        vectorized=True,
    )


# -- suites ------------------------------------------------------------

def homogeneity_suite(samples: int = 1000, seed: int = 0) -> SuiteResult:
    """|H_c(k nu) - k H_c(nu)| over random points and scalings; optimal h for k > 0."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        n, m = int(rng.integers(1, 5)), int(rng.integers(1, 3))
        p = random_linear_problem(rng, n, m)
        xhat = rng.standard_normal(n + 1)
        nu = rng.standard_normal(n + 1)
        u = rng.uniform(-1.0, 1.0, m)
        k = rng.uniform(0.1, 10.0) * rng.choice([-1.0, 1.0])

        base = control_hamiltonian(p, xhat, nu, u)
        scaled = control_hamiltonian(p, xhat, k * nu, u)
        worst = max(worst, abs(scaled - k * base) / (1.0 + abs(k * base)))

        if k > 0:
            h = optimal_contact_hamiltonian(p, xhat, nu)
            h_scaled = optimal_contact_hamiltonian(p, xhat, k * nu)
            worst = max(worst, abs(h_scaled - k * h) / (1.0 + abs(k * h)))
    return _result("homogeneity", worst, 1e-12, samples)


def pairing_suite(samples: int = 100, seed: int = 0, step: float = 1e-3) -> SuiteResult:
    """<nu(t), dxhat(t)> conservation along random linear systems with piecewise-constant controls."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        n, m = int(rng.integers(1, 5)), int(rng.integers(1, 3))
        p = random_linear_problem(rng, n, m)
        pieces = int(rng.integers(1, 4))
        control = ControlSignal(np.linspace(0.0, 1.0, pieces + 1), rng.uniform(-1.0, 1.0, (pieces, m)))
        states = integrate_extended(p, control, 0.0, 1.0, step)
        adjoint = propagate_adjoint(p, states, control, rng.standard_normal(n + 1))
        tangent = propagate_tangent(p, states, control, rng.standard_normal(n + 1))
        worst = max(worst, pairing_defect(adjoint, tangent))
    return _result("pairing", worst, 1e-6, samples, step=step)


def _round_trip_defect(rng: np.random.Generator, samples: int) -> float:
    worst = 0.0
    for i in range(samples):
        n = int(rng.integers(1, 5))
        nu = rng.standard_normal(n + 1)
        if i % 10 == 0:
            nu[0] = 0.0
        pc = from_vector(nu)
        scale = np.max(np.abs(nu))
        for target in [ChartTag.normal()] + [ChartTag.abnormal(a) for a in range(1, n + 1)]:
            pinned = 0 if target.pivot is None else target.pivot
            if abs(nu[pinned]) < 0.1 * scale:
                continue
            back = switch_chart(switch_chart(pc, target), pc.chart)
            worst = max(worst, float(np.max(np.abs(back.coords - pc.coords))) / max(1.0, np.max(np.abs(pc.coords))))
            if pc.chart.pivot is not None or target.pivot is not None:
                worst = max(worst, abs(back.alpha0 - pc.alpha0))
    return worst


def _switch_continuity_defect(step: float = 1e-2, t_end: float = 25.0):
    """
    h = -nu1 x1 has lambda(t) = e^t, so the flow crosses from the normal to
    the abnormal chart near t = ln(1/eps0). Every sample must match (-1, e^t).
    """
    h = ContactHamiltonian(
        lambda xh, nu: -nu[1] * xh[1],
        grad_x=lambda xh, nu: np.array([0.0, -nu[1]]),
        grad_nu=lambda xh, nu: np.array([0.0, -xh[1]]),
        homogeneous=True,
        name="exponential_costate",
    )
    s0 = ContactState(np.array([0.0, 1.0]), from_vector([-1.0, 1.0]))
    trajectory = integrate_contact(h, s0, 0.0, t_end, step=step, method="rk4")
    worst = 0.0
    for t, state in zip(trajectory.times, trajectory.states):
        exact = np.array([-np.exp(-t), 1.0])
        worst = max(worst, _direction_gap(representative(state.costate), exact))
    switched = any(label != "normal" for label in trajectory.charts())
    return worst, switched


def charts_suite(samples: int = 1000, seed: int = 0) -> SuiteResult:
    """Chart round trips, plus projective continuity across a normal-to-abnormal switch."""
    rng = np.random.default_rng(seed)
    round_trip = _round_trip_defect(rng, samples)
    continuity, switched = _switch_continuity_defect()
    defect = max(round_trip / 1e-14, continuity / 1e-9)
    return _result("charts", defect, 1.0, samples, round_trip=round_trip, continuity=continuity,
                   switched=switched, required=switched)


def homogeneous_test_hamiltonian(A: np.ndarray) -> ContactHamiltonian:
    """H = nu0 |x|^2/2 + nu . (A x + 0.1 sin x), independent of x0."""

    def F(x):
        return np.concatenate(([0.5 * x @ x], A @ x + 0.1 * np.sin(x)))

    def value(xh, nu):
        return float(nu @ F(xh[1:]))

    def grad_x(xh, nu):
        x = xh[1:]
        return np.concatenate(([0.0], nu[0] * x + A.T @ nu[1:] + 0.1 * np.cos(x) * nu[1:]))

    def grad_nu(xh, nu):
        return F(xh[1:])

    return ContactHamiltonian(value, grad_x, grad_nu, homogeneous=True, name="random_homogeneous")


def contact_symplectic_suite(samples: int = 50, seed: int = 0, step: float = 1e-2,
                             abnormal_starts: int = 5) -> SuiteResult:
    """Projectivized symplectic flow against the contact chart flow over unit time."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(samples):
        n = int(rng.integers(1, 4))
        H = homogeneous_test_hamiltonian(rng.standard_normal((n, n)))
        xhat0 = rng.standard_normal(n + 1)
        nu0 = rng.standard_normal(n + 1)
        if i < abnormal_starts:
            nu0[0] = 0.0

        _, xs, nus = integrate_symplectic(H, xhat0, nu0, 0.0, 1.0, step)

        pc = from_vector(nu0)
        pinned = 0 if pc.is_normal else pc.pivot
        orientation = float(np.sign(nu0[pinned] / pc.homogeneous()[pinned]))
        chart = OrientedChart.oriented(pc, orientation)
        trajectory = integrate_contact(H, ContactState(xhat0, pc), 0.0, 1.0, step=step, method="rk4", chart=chart)

        if len(trajectory) != xs.shape[0]:
            return _result("contact_symplectic", np.inf, 1e-6, samples, mismatch=i)
        for x_sym, nu_sym, state, nu_contact in zip(xs, nus, trajectory.states, trajectory_costates(trajectory)):
            worst = max(worst, float(np.max(np.abs(state.xhat - x_sym))), _direction_gap(nu_contact, nu_sym))
    return _result("contact_symplectic", worst, 1e-6, samples, abnormal_starts=abnormal_starts)


def _psi_round_trip(rng: np.random.Generator, samples: int) -> float:
    worst = 0.0
    for _ in range(samples):
        n = int(rng.integers(1, 5))
        K = TerminalCost.quadratic(float(rng.uniform(0.1, 2.0)), rng.standard_normal(n))
        y0, y, mu = float(rng.standard_normal()), rng.standard_normal(n), rng.standard_normal(n)
        x0, x, lam = psi_k(K, y0, y, mu)
        z0, z, back = psi_k(K.negated(), x0, x, lam)
        scale = max(1.0, abs(x0), float(np.max(np.abs(lam))))
        worst = max(worst, abs(z0 - y0) / scale, float(np.max(np.abs(z - y))),
                    float(np.max(np.abs(back - mu))) / scale)
    return worst


def _folding_defect(step: float = 1e-2) -> float:
    """Mapped y-solution of the terminal-cost LQ case against the folded problem's solution."""
    case = get_case("lq_terminal_cost")
    p = case.problem
    opts = ShootingOptions(step=step, chart="normal")
    mapped = map_costate_trajectory(p, solve(p, case.initial_guess, opts).trajectory)

    folded = fold_terminal_cost(p)
    folded_solution = solve(folded, ShootingUnknowns.normal([0.0]), opts).trajectory
    if len(folded_solution) != len(mapped):
        return np.inf
    lam_mapped = np.array([s.costate.coords for s in mapped.states])
    lam_folded = np.array([s.costate.coords for s in folded_solution.states])
    return float(np.max(np.abs(lam_mapped - lam_folded)))


def psi_k_suite(samples: int = 1000, seed: int = 0) -> SuiteResult:
    """Psi_K round trip, and Psi_K applied to a solved extremal against terminal-cost folding."""
    rng = np.random.default_rng(seed)
    round_trip = _psi_round_trip(rng, samples)
    folding = _folding_defect()
    defect = max(round_trip / 1e-14, folding / 1e-6)
    return _result("psi_k", defect, 1.0, samples, round_trip=round_trip, folding=folding)


SUITES: Dict[str, Callable[..., SuiteResult]] = {
    "homogeneity": homogeneity_suite,
    "pairing": pairing_suite,
    "charts": charts_suite,
    "contact_symplectic": contact_symplectic_suite,
    "psi_k": psi_k_suite,
}


@log_performance("bench.run_suites")
def run_suites(names: Optional[Sequence[str]] = None, samples: Optional[int] = None,
               seed: int = 0) -> List[SuiteResult]:
    """Run the named suites (all when empty) in the fixed suite order."""
    names = list(names or AppConstants.VERIFY_SUITES)
    unknown = [name for name in names if name not in SUITES]
    if unknown:
        raise ValidationError(f"Unknown suite(s) {', '.join(unknown)}; available: {', '.join(SUITES)}",
                              field="suite")
    results = []
    for name in AppConstants.VERIFY_SUITES:
        if name in names:
            kwargs = {"seed": seed} if samples is None else {"seed": seed, "samples": samples}
            results.append(SUITES[name](**kwargs))
    return results


__all__ = [
    "SuiteResult",
    "random_linear_problem",
    "homogeneous_test_hamiltonian",
    "homogeneity_suite",
    "pairing_suite",
    "charts_suite",
    "contact_symplectic_suite",
    "psi_k_suite",
    "SUITES",
    "run_suites",
]
