"""
Built-in benchmark problems.

Each case is stored as a ProblemDocument, the same JSON form users pass on
the command line, together with a closed-form oracle where one exists and
the direct-oracle settings used by `bench`.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from bench.registry import build_target, build_terminal_cost, get_dynamics
from core.shooting import ShootingUnknowns
from models.documents import ProblemDocument
from models.problem import BoxControlSet, FiniteControlSet, OcpProblem, TimeMode
from utils.error_handlers import ValidationError
from utils.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class AnalyticOracle:
    """Closed-form optimum of a benchmark case."""

    cost: float
    costate0: Tuple[float, ...]
    t1: Optional[float] = None
    switch_times: Tuple[float, ...] = ()
    c: Tuple[float, ...] = ()

    def unknowns(self, p: OcpProblem) -> ShootingUnknowns:
        """Shooting unknowns that solve the boundary problem exactly."""
        return ShootingUnknowns.normal(self.costate0, self.t1 if p.time_mode.is_free else None, self.c)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "cost": self.cost,
            "costate0": list(self.costate0),
            "t1": self.t1,
            "switch_times": list(self.switch_times),
            "c": list(self.c),
        }


@dataclass(frozen=True)
class OracleSettings:
    """Direct-oracle grid: N intervals, G points per control axis, terminal-time grid."""

    intervals: int
    grid_points: int
    time_grid: Optional[Tuple[float, ...]] = None


@dataclass
class BenchmarkCase:
    """A problem, its starting guess and whatever is known about its optimum."""

    name: str
    document: ProblemDocument
    problem: OcpProblem
    initial_guess: ShootingUnknowns
    oracle: Optional[AnalyticOracle] = None
    oracle_settings: Optional[OracleSettings] = None
    tolerances: Dict[str, float] = field(default_factory=dict)

    def summary(self) -> Dict[str, Any]:
        """One row of `list` output."""
        p = self.problem
        return {
            "name": self.name,
            "dynamics": self.document.dynamics,
            "n": p.n,
            "m": p.m,
            "target": p.target.name,
            "time_mode": p.time_mode.kind.value,
            "terminal_cost": p.has_terminal_cost,
            "analytic": self.oracle is not None,
            "description": p.description,
        }


# -- document ingestion ------------------------------------------------

def problem_from_document(doc: ProblemDocument) -> OcpProblem:
    """Instantiate an OcpProblem from a validated document."""
    spec = get_dynamics(doc.dynamics, doc.params)

    if doc.control_set.box is not None:
        control_set = BoxControlSet(np.asarray(doc.control_set.box.lo), np.asarray(doc.control_set.box.hi))
    else:
        control_set = FiniteControlSet(np.asarray(doc.control_set.points))
    if control_set.m != spec.m:
        raise ValidationError(f"Control set has dimension {control_set.m}, dynamics '{doc.dynamics}' "
                              f"expects {spec.m}", field="control_set")
    if len(doc.x0) != spec.n:
        raise ValidationError(f"x0 has {len(doc.x0)} entries, dynamics '{doc.dynamics}' expects {spec.n}",
                              field="x0")

    time_mode = TimeMode.free() if doc.time_mode.mode == "free" else TimeMode.fixed(doc.time_mode.t1)
    terminal_cost = build_terminal_cost(
        doc.terminal_cost.model_dump() if doc.terminal_cost is not None else None, spec.n)

    return OcpProblem(
        name=doc.name,
        n=spec.n,
        m=spec.m,
        dynamics=spec.dynamics,
        running_cost=spec.running_cost,
        control_set=control_set,
        x0=np.asarray(doc.x0, dtype=float),
        target=build_target(doc.target.model_dump(), spec.n),
        time_mode=time_mode,
        t0=doc.t0,
        terminal_cost=terminal_cost,
        dynamics_jacobian=spec.dynamics_jacobian,
        cost_gradient=spec.cost_gradient,
        argmax=spec.argmax_for(control_set),
        vectorized=True,
        description=doc.description,
    )


def unknowns_from_document(doc: ProblemDocument, p: OcpProblem) -> ShootingUnknowns:
    """Initial guess from the document; missing parts default to lambda0 = -1/2, t1 = t0 + 1, c = 0."""
    guess = doc.initial_guess
    lam0 = guess.lambda0 if guess.lambda0 is not None else [-0.5] * p.n
    if len(lam0) != p.n:
        raise ValidationError(f"Initial costate needs {p.n} entries", field="initial_guess.lambda0")
    c = guess.c if guess.c is not None else [0.0] * p.target.k
    if len(c) != p.target.k:
        raise ValidationError(f"Initial multipliers need {p.target.k} entries", field="initial_guess.c")
    t1 = None
    if p.time_mode.is_free:
        t1 = guess.t1 if guess.t1 is not None else p.t0 + 1.0
    return ShootingUnknowns.normal(lam0, t1, c)


def case_from_document(doc: ProblemDocument, oracle: Optional[AnalyticOracle] = None,
                       oracle_settings: Optional[OracleSettings] = None,
                       tolerances: Optional[Dict[str, float]] = None) -> BenchmarkCase:
    p = problem_from_document(doc)
    return BenchmarkCase(
        name=doc.name,
        document=doc,
        problem=p,
        initial_guess=unknowns_from_document(doc, p),
        oracle=oracle,
        oracle_settings=oracle_settings,
        tolerances=dict(tolerances or {}),
    )


# -- built-in cases ----------------------------------------------------

def _double_integrator_min_time() -> BenchmarkCase:
    doc = ProblemDocument(
        name="double_integrator_min_time",
        dynamics="double_integrator",
        params={"running_cost": "time"},
        control_set={"box": {"lo": [-1.0], "hi": [1.0]}},
        x0=[1.0, 0.0],
        target={"kind": "point", "point": [0.0, 0.0]},
        time_mode={"mode": "free"},
        initial_guess={"lambda0": [-0.6, -0.6], "t1": 1.5, "c": [0.0, 0.0]},
        description="Minimum time to the origin; bang-bang with one switch",
    )
    oracle = AnalyticOracle(cost=2.0, costate0=(-1.0, -1.0), t1=2.0, switch_times=(1.0,), c=(-1.0, 1.0))
    settings = OracleSettings(4, 3, tuple(np.linspace(1.8, 2.2, 9)))
    return case_from_document(doc, oracle, settings,
                              {"t1": 1e-4, "switch": 1e-4, "max_principle": 1e-8, "oracle_slack": 1e-2})


def _min_time_to_line() -> BenchmarkCase:
    doc = ProblemDocument(
        name="min_time_to_line",
        dynamics="double_integrator",
        params={"running_cost": "time"},
        control_set={"box": {"lo": [-1.0], "hi": [1.0]}},
        x0=[1.0, 0.0],
        target={"kind": "hyperplane", "normal": [1.0, 0.0], "offset": 0.0},
        time_mode={"mode": "free"},
        initial_guess={"lambda0": [-0.5, -0.8], "t1": 1.2, "c": [0.0]},
        description="Minimum time to the line x1 = 0; u = -1 throughout",
    )
    root = float(np.sqrt(2.0))
    oracle = AnalyticOracle(cost=root, costate0=(-1.0 / root, -1.0), t1=root, c=(-1.0 / root,))
    settings = OracleSettings(4, 3, tuple(np.linspace(1.3, 1.5, 201)))
    return case_from_document(doc, oracle, settings,
                              {"t1": 1e-4, "transversality": 1e-6, "oracle_slack": 2e-3})


def _lq_terminal_cost() -> BenchmarkCase:
    doc = ProblemDocument(
        name="lq_terminal_cost",
        dynamics="single_integrator",
        params={"n": 1, "running_cost": "energy"},
        control_set={"box": {"lo": [-1.0], "hi": [1.0]}},
        x0=[1.0],
        target={"kind": "free"},
        terminal_cost={"kind": "quadratic", "weight": 1.0},
        time_mode={"mode": "fixed", "t1": 1.0},
        initial_guess={"lambda0": [0.0]},
        description="x' = u, L = u^2/2, K = x^2/2, free endpoint at t1 = 1",
    )
    oracle = AnalyticOracle(cost=0.25, costate0=(-0.5,), t1=1.0)
    return case_from_document(doc, oracle, OracleSettings(4, 21),
                              {"costate": 1e-8, "cost": 1e-8, "transversality": 1e-8, "oracle_slack": 2e-3})


def _linear_pairing() -> BenchmarkCase:
    doc = ProblemDocument(
        name="linear_pairing",
        dynamics="linear_quadratic",
        params={"A": [[0.0, 1.0], [-1.0, -0.1]], "B": [[0.0], [1.0]], "Q": [[1.0, 0.0], [0.0, 1.0]], "r": 1.0},
        control_set={"box": {"lo": [-1.0], "hi": [1.0]}},
        x0=[1.0, 0.0],
        target={"kind": "free"},
        time_mode={"mode": "fixed", "t1": 1.0},
        initial_guess={"lambda0": [0.0, 0.0]},
        description="Damped oscillator with quadratic cost; linear dynamics for propagation checks",
    )
    return case_from_document(doc, None, OracleSettings(4, 21), {"oracle_slack": 1e-2})


_BUILDERS = {
    "double_integrator_min_time": _double_integrator_min_time,
    "min_time_to_line": _min_time_to_line,
    "lq_terminal_cost": _lq_terminal_cost,
    "linear_pairing": _linear_pairing,
}


def case_names() -> List[str]:
    return list(_BUILDERS)


def catalog() -> List[BenchmarkCase]:
    """Every built-in case, in fixed order."""
    return [build() for build in _BUILDERS.values()]


def get_case(name: str) -> BenchmarkCase:
    if name not in _BUILDERS:
        raise ValidationError(f"Unknown problem '{name}'; available: {', '.join(_BUILDERS)}", field="problem")
    return _BUILDERS[name]()


__all__ = [
    "AnalyticOracle",
    "OracleSettings",
    "BenchmarkCase",
    "problem_from_document",
    "unknowns_from_document",
    "case_from_document",
    "case_names",
    "catalog",
    "get_case",
]
