"""
Control and contact Hamiltonians of an optimal-control problem.

H_c(xhat, nuhat, u) = nu . f(x, u) + nu0 L(x, u) is homogeneous of degree one
in nuhat; its projection to a chart is h_c(xhat, [nuhat], u), equal to
lambda . f - L in the normal chart and alpha0 L + alpha . f in the abnormal
one. The optimal contact Hamiltonian maximizes h_c over U.
"""

from typing import Callable, Tuple, Union

import numpy as np

from core.contact import ContactHamiltonian
from models.costate import ProjectiveCostate
from models.problem import BoxControlSet, ExtendedState, FiniteControlSet, OcpProblem, as_xhat
from utils.error_handlers import EvaluationFailure
from utils.logger import get_logger
from utils.settings import integrator_config, maximizer_config

logger = get_logger(__name__)

Costate = Union[ProjectiveCostate, np.ndarray]


def _homogeneous(nu: Costate) -> np.ndarray:
    if isinstance(nu, ProjectiveCostate):
        return nu.homogeneous()
    return np.asarray(nu, dtype=float).reshape(-1)


def extend_system(p: OcpProblem) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Extended dynamics fhat(xhat, u) = (L(x, u), f(x, u))."""
    return p.fhat


def control_hamiltonian(p: OcpProblem, xhat: Union[ExtendedState, np.ndarray],
                        nu: np.ndarray, u: np.ndarray) -> float:
    """<nuhat, fhat(xhat, u)>; raises ControlOutOfSet for u outside U."""
    u = p.control_set.require(u)
    return float(_homogeneous(nu) @ p.fhat(as_xhat(xhat), u))


def contact_control_hamiltonian(p: OcpProblem, xhat: Union[ExtendedState, np.ndarray],
                                pc: ProjectiveCostate, u: np.ndarray) -> float:
    """h_c on the chart representative: lambda . f - L, or alpha0 L + alpha . f."""
    return control_hamiltonian(p, xhat, pc.homogeneous(), u)


def batch_control_hamiltonian(p: OcpProblem, x: np.ndarray, nu: np.ndarray,
                              controls: np.ndarray) -> np.ndarray:
    """H_c at one state for a stack of controls, shape (K,). Non-finite entries become -inf."""
    controls = np.atleast_2d(controls)
    if p.vectorized:
        X = np.broadcast_to(x, (controls.shape[0], x.size))
        with np.errstate(all="ignore"):
            L = np.broadcast_to(np.asarray(p.running_cost(X, controls), dtype=float), (controls.shape[0],))
            F = np.asarray(p.dynamics(X, controls), dtype=float).reshape(controls.shape[0], x.size)
            values = nu[0] * L + F @ nu[1:]
    else:
        values = np.empty(controls.shape[0])
        for i, u in enumerate(controls):
            try:
                values[i] = nu[0] * p.L(x, u) + p.f(x, u) @ nu[1:]
            except (ArithmeticError, ValueError):
                values[i] = np.nan
    return np.where(np.isfinite(values), values, -np.inf)


def _grid_maximize(p: OcpProblem, x: np.ndarray, nu: np.ndarray) -> np.ndarray:
    U = p.control_set
    config = maximizer_config
    if isinstance(U, FiniteControlSet):
        values = batch_control_hamiltonian(p, x, nu, U.points)
        if not np.isfinite(values).any():
            raise EvaluationFailure("Control Hamiltonian is non-finite on every point of U")
        return U.points[int(np.argmax(values))]

    if not isinstance(U, BoxControlSet):
        raise EvaluationFailure(f"No maximizer for control set {type(U).__name__}")

    candidates = U.grid(config.grid_points)
    values = batch_control_hamiltonian(p, x, nu, candidates)
    if not np.isfinite(values).any():
        raise EvaluationFailure("Control Hamiltonian is non-finite on the whole control grid")
    best = int(np.argmax(values))
    u_best, h_best = candidates[best], values[best]

    half_width = 0.5 * (U.hi - U.lo)
    for _ in range(config.refinement_rounds):
        half_width = half_width * config.shrink_factor
        lo = np.maximum(U.lo, u_best - half_width)
        hi = np.minimum(U.hi, u_best + half_width)
        candidates = U.grid(config.grid_points, lo, hi)
        values = batch_control_hamiltonian(p, x, nu, candidates)
        best = int(np.argmax(values))
        if values[best] > h_best:
            u_best, h_best = candidates[best], values[best]
    return u_best


def maximize_control(p: OcpProblem, xhat: Union[ExtendedState, np.ndarray],
                     pc: Costate) -> Tuple[np.ndarray, float]:
    """
    u* = argmax_U h_c(xhat, [nuhat], u) and h = h_c(u*).

    Uses the problem's analytic argmax when supplied, the exact maximum for a
    finite U (first point on ties), and grid-then-refine for a box.
    """
    xhat = as_xhat(xhat)
    nu = _homogeneous(pc)
    x = xhat[1:]
    if p.argmax is not None:
        u = np.atleast_1d(np.asarray(p.argmax(x, nu), dtype=float))
    else:
        u = _grid_maximize(p, x, nu)
    value = float(nu @ p.fhat(xhat, u))
    return u, value


def optimal_contact_hamiltonian(p: OcpProblem, xhat: Union[ExtendedState, np.ndarray],
                                pc: Costate) -> float:
    """h(xhat, [nuhat]) = max over U of h_c."""
    return maximize_control(p, xhat, pc)[1]


class FrozenControlHamiltonian(ContactHamiltonian):
    """H_c(xhat, nuhat, u) for one fixed control, with exact partials."""

    homogeneous = True

    def __init__(self, problem: OcpProblem, u: np.ndarray):
        self.problem = problem
        self.u = np.atleast_1d(np.asarray(u, dtype=float))
        self.name = f"{problem.name}[u={self.u.tolist()}]"

    def value(self, xhat: np.ndarray, nu: np.ndarray) -> float:
        return float(nu @ self.problem.fhat(xhat, self.u))

    def _partials(self, xhat: np.ndarray, nu: np.ndarray, u: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
        p = self.problem
        x = xhat[1:]
        gnu = p.fhat(xhat, u)
        gx = np.zeros(p.n + 1)
        gx[1:] = nu[0] * p.L_x(x, u) + p.f_x(x, u).T @ nu[1:]
        if not np.all(np.isfinite(gx)):
            raise EvaluationFailure(f"Non-finite Jacobians at x={x.tolist()}")
        return float(nu @ gnu), gx, gnu

    def evaluate(self, xhat: np.ndarray, nu: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
        return self._partials(np.asarray(xhat, dtype=float), np.asarray(nu, dtype=float), self.u)

    def control(self, xhat: np.ndarray, nu: np.ndarray) -> np.ndarray:
        return self.u

    def frozen(self, u: np.ndarray) -> ContactHamiltonian:
        return FrozenControlHamiltonian(self.problem, u)


class OptimalContactHamiltonian(FrozenControlHamiltonian):
    """
    h(xhat, [nuhat]) = max_U h_c with partials from the envelope theorem:
    dh/dnuhat = fhat(x, u*), dh/dx = nu0 L_x + f_x^T nu at u*, dh/dx0 = 0.
    """

    switching = True

    def __init__(self, problem: OcpProblem):
        self.problem = problem
        self.u = None
        self.name = f"h[{problem.name}]"
        width = problem.control_set.width
        self._jump = integrator_config.switch_jump_fraction * width

    def control(self, xhat: np.ndarray, nu: np.ndarray) -> np.ndarray:
        return maximize_control(self.problem, xhat, nu)[0]

    def value(self, xhat: np.ndarray, nu: np.ndarray) -> float:
        return maximize_control(self.problem, xhat, nu)[1]

    def evaluate(self, xhat: np.ndarray, nu: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
        xhat = np.asarray(xhat, dtype=float)
        nu = np.asarray(nu, dtype=float)
        return self._partials(xhat, nu, self.control(xhat, nu))

    def control_jump(self, u_a: np.ndarray, u_b: np.ndarray) -> bool:
        """A maximizer change large enough to count as a switch."""
        if isinstance(self.problem.control_set, FiniteControlSet):
            return not np.array_equal(u_a, u_b)
        return bool(np.max(np.abs(np.asarray(u_a) - np.asarray(u_b))) > self._jump)


__all__ = [
    "extend_system",
    "control_hamiltonian",
    "contact_control_hamiltonian",
    "batch_control_hamiltonian",
    "maximize_control",
    "optimal_contact_hamiltonian",
    "FrozenControlHamiltonian",
    "OptimalContactHamiltonian",
]
