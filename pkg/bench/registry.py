"""
Registry of built-in dynamics, targets and terminal costs.

Problems are code, not parsed expressions: a problem document names a
dynamics family and passes numeric parameters. Every family is vectorized
(leading batch dimensions on x and u) and, for box control sets, supplies
an analytic maximizer of the control Hamiltonian.
"""

from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional

import numpy as np

from models.problem import BoxControlSet, ControlSet, TargetSet, TerminalCost
from utils.error_handlers import ValidationError


def quadratic_argmax(b: np.ndarray, q: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """
    Per-axis maximizer of b.u + q.u^2/2 over the box [lo, hi].

    Concave axes (q < 0) clip the stationary point; linear or convex axes
    take the better endpoint, the lower one on ties.
    """
    b = np.asarray(b, dtype=float)
    q = np.broadcast_to(np.asarray(q, dtype=float), b.shape)
    u = np.empty_like(b)
    for i in range(b.size):
        if q[i] < 0:
            u[i] = np.clip(-b[i] / q[i], lo[i], hi[i])
        else:
            at_lo = b[i] * lo[i] + 0.5 * q[i] * lo[i] ** 2
            at_hi = b[i] * hi[i] + 0.5 * q[i] * hi[i] ** 2
            u[i] = hi[i] if at_hi > at_lo else lo[i]
    return u


@dataclass(frozen=True)
class DynamicsSpec:
    """Callables and dimensions of one dynamics family instance."""

    n: int
    m: int
    dynamics: Callable
    running_cost: Callable
    dynamics_jacobian: Callable
    cost_gradient: Callable
    argmax_factory: Optional[Callable[[ControlSet], Optional[Callable]]] = None

    def argmax_for(self, control_set: ControlSet) -> Optional[Callable]:
        if self.argmax_factory is None or not isinstance(control_set, BoxControlSet):
            return None
        return self.argmax_factory(control_set)


def _running_cost_kind(params: Dict[str, Any]) -> str:
    kind = params.get("running_cost", "time")
    if kind not in ("time", "energy"):
        raise ValidationError(f"Unknown running cost '{kind}' (time or energy)", field="params.running_cost")
    return kind


def double_integrator(params: Dict[str, Any]) -> DynamicsSpec:
    """x1' = x2, x2' = u; L = 1 (time) or u^2/2 (energy)."""
    kind = _running_cost_kind(params)

    def f(x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        return np.stack([x[..., 1], u[..., 0]], axis=-1)

    def L(x, u):
        u = np.asarray(u, dtype=float)
        return np.ones(u.shape[:-1]) if kind == "time" else 0.5 * u[..., 0] ** 2

    def f_x(x, u):
        return np.array([[0.0, 1.0], [0.0, 0.0]])

    def L_x(x, u):
        return np.zeros(2)

    def factory(U: BoxControlSet):
        q = 0.0 if kind == "time" else 1.0

        def argmax(x, nu):
            return quadratic_argmax(np.array([nu[2]]), np.array([nu[0] * q]), U.lo, U.hi)
        return argmax

    return DynamicsSpec(2, 1, f, L, f_x, L_x, factory)


def single_integrator(params: Dict[str, Any]) -> DynamicsSpec:
    """x' = u in R^n; L = 1 (time) or |u|^2/2 (energy)."""
    n = int(params.get("n", 1))
    if n < 1:
        raise ValidationError("Single integrator needs n >= 1", field="params.n")
    kind = _running_cost_kind(params)

    def f(x, u):
        return np.asarray(u, dtype=float) + 0.0 * np.asarray(x, dtype=float)

    def L(x, u):
        u = np.asarray(u, dtype=float)
        return np.ones(u.shape[:-1]) if kind == "time" else 0.5 * np.sum(u ** 2, axis=-1)

    def f_x(x, u):
        return np.zeros((n, n))

    def L_x(x, u):
        return np.zeros(n)

    def factory(U: BoxControlSet):
        q = 0.0 if kind == "time" else 1.0

        def argmax(x, nu):
            return quadratic_argmax(np.asarray(nu[1:], dtype=float), np.full(n, nu[0] * q), U.lo, U.hi)
        return argmax

    return DynamicsSpec(n, n, f, L, f_x, L_x, factory)


def linear_quadratic(params: Dict[str, Any]) -> DynamicsSpec:
    """x' = A x + B u; L = (x^T Q x + sum r_i u_i^2) / 2 with diagonal control weights r."""
    A = np.atleast_2d(np.asarray(params.get("A", [[0.0]]), dtype=float))
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValidationError("A must be square", field="params.A")
    B = np.asarray(params.get("B", np.eye(n)), dtype=float).reshape(n, -1)
    m = B.shape[1]
    Q = np.asarray(params.get("Q", np.eye(n)), dtype=float).reshape(n, n)
    r = np.broadcast_to(np.asarray(params.get("r", 1.0), dtype=float), (m,)).copy()
    if np.any(r < 0):
        raise ValidationError("Control weights r must be nonnegative", field="params.r")

    def f(x, u):
        return np.asarray(x, dtype=float) @ A.T + np.asarray(u, dtype=float) @ B.T

    def L(x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        return 0.5 * (np.einsum("...i,ij,...j->...", x, Q, x) + np.sum(r * u ** 2, axis=-1))

    def f_x(x, u):
        return A

    def L_x(x, u):
        return 0.5 * (Q + Q.T) @ np.asarray(x, dtype=float)

    def factory(U: BoxControlSet):
        def argmax(x, nu):
            return quadratic_argmax(B.T @ np.asarray(nu[1:], dtype=float), nu[0] * r, U.lo, U.hi)
        return argmax

    return DynamicsSpec(n, m, f, L, f_x, L_x, factory)


DYNAMICS: Dict[str, Callable[[Dict[str, Any]], DynamicsSpec]] = {
    "double_integrator": double_integrator,
    "single_integrator": single_integrator,
    "linear_quadratic": linear_quadratic,
}


def get_dynamics(name: str, params: Optional[Dict[str, Any]] = None) -> DynamicsSpec:
    if name not in DYNAMICS:
        raise ValidationError(f"Unknown dynamics '{name}'; available: {', '.join(sorted(DYNAMICS))}",
                              field="dynamics")
    return DYNAMICS[name](dict(params or {}))


def build_target(spec: Dict[str, Any], n: int) -> TargetSet:
    """{"kind": "free"} | {"kind": "point", "point"} | {"kind": "hyperplane", "normal", "offset"}."""
    kind = spec.get("kind", "free")
    if kind == "free":
        return TargetSet.free()
    if kind == "point":
        point = np.asarray(spec.get("point", np.zeros(n)), dtype=float)
        if point.size != n:
            raise ValidationError(f"Target point needs {n} entries", field="target.point")
        return TargetSet.point(point)
    if kind == "hyperplane":
        normal = np.asarray(spec.get("normal"), dtype=float)
        if normal.size != n or not np.any(normal):
            raise ValidationError(f"Hyperplane normal needs {n} entries, not all zero", field="target.normal")
        return TargetSet.hyperplane(normal, float(spec.get("offset", 0.0)))
    raise ValidationError(f"Unknown target kind '{kind}'", field="target.kind")


def build_terminal_cost(spec: Optional[Dict[str, Any]], n: int) -> Optional[TerminalCost]:
    """None | {"kind": "quadratic", "weight", "reference"}."""
    if not spec:
        return None
    kind = spec.get("kind")
    if kind == "quadratic":
        reference = spec.get("reference")
        if reference is not None and len(reference) != n:
            raise ValidationError(f"Reference needs {n} entries", field="terminal_cost.reference")
        return TerminalCost.quadratic(float(spec.get("weight", 1.0)), reference)
    raise ValidationError(f"Unknown terminal cost kind '{kind}'", field="terminal_cost.kind")


__all__ = [
    "quadratic_argmax",
    "DynamicsSpec",
    "DYNAMICS",
    "get_dynamics",
    "build_target",
    "build_terminal_cost",
]
