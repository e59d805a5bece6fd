"""
Optimal-control problem models.

This module defines the problem data the solver consumes: the admissible
control set U, the target set S1 as a level set, the optional terminal cost
K, the time mode, the extended state and the problem itself. Problem
callables take numpy arrays; problems flagged `vectorized` accept stacked
leading batch dimensions, which the direct oracle exploits.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional, Sequence, Union

import numpy as np

from core.differentiation import central_gradient, central_jacobian
from utils.error_handlers import ControlOutOfSet, EvaluationFailure, ValidationError
from utils.logger import get_logger

logger = get_logger(__name__)

ArrayFn = Callable[[np.ndarray, np.ndarray], np.ndarray]
ScalarFn = Callable[[np.ndarray, np.ndarray], float]


class TimeModeKind(str, Enum):
    """Terminal time handling."""

    FREE = "free"
    FIXED = "fixed"


@dataclass(frozen=True)
class TimeMode:
    """FreeTerminal or FixedTerminal(t1)."""

    kind: TimeModeKind = TimeModeKind.FREE
    t1: Optional[float] = None

    def __post_init__(self):
        if self.kind is TimeModeKind.FIXED and self.t1 is None:
            raise ValidationError("Fixed terminal time needs t1", field="t1")

    @classmethod
    def free(cls) -> 'TimeMode':
        return cls(TimeModeKind.FREE)

    @classmethod
    def fixed(cls, t1: float) -> 'TimeMode':
        return cls(TimeModeKind.FIXED, float(t1))

    @property
    def is_free(self) -> bool:
        return self.kind is TimeModeKind.FREE


@dataclass(frozen=True)
class ExtendedState:
    """A point (x0, x) of R^{n+1}: accumulated running cost plus state."""

    x0: float
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).reshape(-1))
        if not (np.isfinite(self.x0) and np.all(np.isfinite(self.x))):
            raise ValidationError("Extended state entries must be finite", field="xhat")

    @property
    def n(self) -> int:
        return self.x.size

    def as_array(self) -> np.ndarray:
        return np.concatenate(([float(self.x0)], self.x))

    @classmethod
    def from_array(cls, xhat: Sequence[float]) -> 'ExtendedState':
        xhat = np.asarray(xhat, dtype=float)
        return cls(float(xhat[0]), xhat[1:])


def as_xhat(value: Union[ExtendedState, Sequence[float]]) -> np.ndarray:
    """Accept either an ExtendedState or a raw (n+1)-array."""
    if isinstance(value, ExtendedState):
        return value.as_array()
    return np.asarray(value, dtype=float).reshape(-1)


class ControlSet:
    """Compact admissible control set U in R^m."""

    m: int

    def contains(self, u: np.ndarray) -> bool:
        raise NotImplementedError

    def grid(self, points: int) -> np.ndarray:
        """Evaluation grid, shape (K, m), in lexicographic order."""
        raise NotImplementedError

    @property
    def width(self) -> float:
        """Largest coordinate spread of U; scales switch detection."""
        raise NotImplementedError

    def require(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float).reshape(-1)
        if not self.contains(u):
            raise ControlOutOfSet(f"Control {u.tolist()} is not in {self!r}")
        return u


@dataclass(frozen=True)
class BoxControlSet(ControlSet):
    """Box [lo, hi] with finite bounds."""

    lo: np.ndarray
    hi: np.ndarray
    tol: float = 1e-12

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape or lo.size == 0:
            raise ValidationError("Box bounds must be non-empty and of equal length", field="control_set")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValidationError("Box bounds must be finite (U compact)", field="control_set")
        if np.any(lo > hi):
            raise ValidationError("Box lower bound exceeds upper bound", field="control_set")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def m(self) -> int:
        return self.lo.size

    @property
    def width(self) -> float:
        return float(np.max(self.hi - self.lo))

    def contains(self, u: np.ndarray) -> bool:
        u = np.asarray(u, dtype=float).reshape(-1)
        if u.size != self.m:
            return False
        slack = self.tol * np.maximum(1.0, np.abs(self.hi - self.lo))
        return bool(np.all(u >= self.lo - slack) and np.all(u <= self.hi + slack))

    def axes(self, points: int, lo: np.ndarray = None, hi: np.ndarray = None) -> list:
        lo = self.lo if lo is None else lo
        hi = self.hi if hi is None else hi
        return [np.linspace(a, b, points) if b > a else np.array([a]) for a, b in zip(lo, hi)]

    def grid(self, points: int, lo: np.ndarray = None, hi: np.ndarray = None) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(points, lo, hi), indexing="ij")
        return np.stack([g.reshape(-1) for g in mesh], axis=1)


@dataclass(frozen=True)
class FiniteControlSet(ControlSet):
    """A finite, nonempty list of control points."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.size == 0:
            raise ValidationError("Finite control set must be nonempty", field="control_set")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("Control points must be finite", field="control_set")
        object.__setattr__(self, "points", pts)

    @property
    def m(self) -> int:
        return self.points.shape[1]

    @property
    def width(self) -> float:
        return float(np.max(self.points.max(axis=0) - self.points.min(axis=0)))

    def contains(self, u: np.ndarray) -> bool:
        u = np.asarray(u, dtype=float).reshape(-1)
        if u.size != self.m:
            return False
        return bool(np.any(np.all(self.points == u, axis=1)))

    def grid(self, points: int = 0) -> np.ndarray:
        return self.points


@dataclass(frozen=True)
class TargetSet:
    """Level set S1 = {x : g(x) = 0}, g: R^n -> R^k with full-rank Jacobian on S1.

    k = 0 encodes a free endpoint (S1 = R^n, (T S1)^perp = {0}).
    """

    k: int
    g: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "target"

    def value(self, x: np.ndarray) -> np.ndarray:
        if self.k == 0:
            return np.zeros(0)
        return np.atleast_1d(np.asarray(self.g(np.asarray(x, dtype=float)), dtype=float))

    def dg(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.k == 0:
            return np.zeros((0, x.size))
        if self.jacobian is not None:
            return np.asarray(self.jacobian(x), dtype=float).reshape(self.k, x.size)
        return central_jacobian(self.g, x).reshape(self.k, x.size)

    @classmethod
    def free(cls) -> 'TargetSet':
        return cls(0, lambda x: np.zeros(0), name="free")

    @classmethod
    def point(cls, target: Sequence[float]) -> 'TargetSet':
        target = np.asarray(target, dtype=float)
        n = target.size
        return cls(n, lambda x: np.asarray(x, dtype=float) - target,
                   lambda x: np.eye(n), name="point")

    @classmethod
    def hyperplane(cls, normal: Sequence[float], offset: float = 0.0) -> 'TargetSet':
        normal = np.asarray(normal, dtype=float)
        return cls(1, lambda x: np.array([normal @ np.asarray(x, dtype=float) - offset]),
                   lambda x: normal.reshape(1, -1), name="hyperplane")


@dataclass(frozen=True)
class TerminalCost:
    """K(x) with gradient dK and optional Hessian."""

    value: Callable[[np.ndarray], float]
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "K"

    def __call__(self, x: np.ndarray) -> float:
        return float(self.value(np.asarray(x, dtype=float)))

    def grad(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.gradient is not None:
            return np.asarray(self.gradient(x), dtype=float).reshape(-1)
        return central_gradient(self.value, x)

    def hess(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.hessian is not None:
            return np.asarray(self.hessian(x), dtype=float).reshape(x.size, x.size)
        return central_jacobian(self.grad, x)

    def negated(self) -> 'TerminalCost':
        """-K, so that Phi_{-K} inverts Phi_K."""
        return TerminalCost(
            value=lambda x: -self(x),
            gradient=lambda x: -self.grad(x),
            hessian=lambda x: -self.hess(x),
            name=f"-{self.name}",
        )

    @classmethod
    def zero(cls) -> 'TerminalCost':
        return cls(lambda x: 0.0, lambda x: np.zeros_like(np.asarray(x, dtype=float)),
                   lambda x: np.zeros((np.size(x), np.size(x))), name="zero")

    @classmethod
    def quadratic(cls, weight: float = 1.0, reference: Optional[Sequence[float]] = None) -> 'TerminalCost':
        """K(x) = weight/2 * |x - reference|^2."""
        ref = None if reference is None else np.asarray(reference, dtype=float)

        def shift(x):
            x = np.asarray(x, dtype=float)
            return x if ref is None else x - ref

        return cls(
            value=lambda x: 0.5 * weight * float(shift(x) @ shift(x)),
            gradient=lambda x: weight * shift(x),
            hessian=lambda x: weight * np.eye(np.size(x)),
            name="quadratic",
        )


@dataclass(frozen=True)
class OcpProblem:
    """
    min K(x(t1)) + int L(x, u) dt  s.t.  x' = f(x, u), x(t0) = x0, x(t1) in S1, u in U.

    `argmax` optionally gives the maximizer u*(x, nuhat) of the control
    Hamiltonian nuhat . fhat(x, u) over U for any homogeneous covector
    nuhat = (nu0, nu); when absent the grid maximizer is used.
    """

    name: str
    n: int
    m: int
    dynamics: ArrayFn
    running_cost: ScalarFn
    control_set: ControlSet
    x0: np.ndarray
    target: TargetSet
    time_mode: TimeMode = field(default_factory=TimeMode.free)
    t0: float = 0.0
    terminal_cost: Optional[TerminalCost] = None
    dynamics_jacobian: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    cost_gradient: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    argmax: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    vectorized: bool = False
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float).reshape(-1))
        if self.n < 1 or self.m < 1:
            raise ValidationError(f"Dimensions must be positive, got n={self.n}, m={self.m}")
        if self.x0.size != self.n:
            raise ValidationError(f"x0 has {self.x0.size} entries, expected {self.n}", field="x0")
        if self.control_set.m != self.m:
            raise ValidationError(f"Control set dimension {self.control_set.m} != m={self.m}",
                                  field="control_set")
        if not 0 <= self.target.k <= self.n:
            raise ValidationError(f"Target codimension k={self.target.k} must lie in [0, n]", field="target")
        if self.time_mode.kind is TimeModeKind.FIXED and not self.time_mode.t1 > self.t0:
            raise ValidationError("Fixed terminal time must exceed t0", field="t1")

    # -- evaluators -----------------------------------------------------

    def f(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.asarray(self.dynamics(x, u), dtype=float)

    def L(self, x: np.ndarray, u: np.ndarray) -> float:
        return float(self.running_cost(x, u))

    def f_x(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Jacobian df/dx, shape (n, n)."""
        x = np.asarray(x, dtype=float)
        if self.dynamics_jacobian is not None:
            return np.asarray(self.dynamics_jacobian(x, u), dtype=float).reshape(self.n, self.n)
        return central_jacobian(lambda z: self.f(z, u), x)

    def L_x(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Gradient dL/dx, shape (n,)."""
        x = np.asarray(x, dtype=float)
        if self.cost_gradient is not None:
            return np.asarray(self.cost_gradient(x, u), dtype=float).reshape(self.n)
        return central_gradient(lambda z: self.L(z, u), x)

    def fhat(self, xhat: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Extended dynamics (L, f); independent of x0."""
        x = np.asarray(xhat, dtype=float)[1:]
        value = np.concatenate(([self.L(x, u)], self.f(x, u)))
        if not np.all(np.isfinite(value)):
            raise EvaluationFailure(f"Non-finite extended dynamics at x={x.tolist()}, u={np.ravel(u).tolist()}")
        return value

    def fhat_x(self, xhat: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Df-hat with respect to xhat: rows (L, f), zero column for x0."""
        x = np.asarray(xhat, dtype=float)[1:]
        jac = np.zeros((self.n + 1, self.n + 1))
        jac[0, 1:] = self.L_x(x, u)
        jac[1:, 1:] = self.f_x(x, u)
        return jac

    def K(self, x: np.ndarray) -> float:
        return 0.0 if self.terminal_cost is None else self.terminal_cost(x)

    def dK(self, x: np.ndarray) -> np.ndarray:
        if self.terminal_cost is None:
            return np.zeros(self.n)
        return self.terminal_cost.grad(x)

    @property
    def has_terminal_cost(self) -> bool:
        return self.terminal_cost is not None

    def with_initial_state(self, x0: Sequence[float]) -> 'OcpProblem':
        return replace(self, x0=np.asarray(x0, dtype=float))

    def with_time_mode(self, time_mode: TimeMode) -> 'OcpProblem':
        return replace(self, time_mode=time_mode)


__all__ = [
    "TimeModeKind",
    "TimeMode",
    "ExtendedState",
    "as_xhat",
    "ControlSet",
    "BoxControlSet",
    "FiniteControlSet",
    "TargetSet",
    "TerminalCost",
    "OcpProblem",
]
