"""
Pydantic documents for JSON problem ingestion, run configuration and reports.
"""

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator


class BoxDocument(BaseModel):
    """Finite box bounds."""

    lo: List[float] = Field(..., description="Lower bounds, one per control axis")
    hi: List[float] = Field(..., description="Upper bounds, one per control axis")

    @model_validator(mode="after")
    def check_bounds(self):
        """Bounds must have equal length and lo <= hi."""
        if len(self.lo) != len(self.hi) or not self.lo:
            raise ValueError("Box bounds must be non-empty and of equal length")
        if any(a > b for a, b in zip(self.lo, self.hi)):
            raise ValueError("Box lower bound exceeds upper bound")
        return self


class ControlSetDocument(BaseModel):
    """Either {"box": {...}} or {"points": [[...], ...]}."""

    box: Optional[BoxDocument] = Field(None, description="Box control set")
    points: Optional[List[List[float]]] = Field(None, description="Finite control set")

    @model_validator(mode="after")
    def check_exactly_one(self):
        if (self.box is None) == (self.points is None):
            raise ValueError("Give exactly one of 'box' or 'points'")
        if self.points is not None:
            if not self.points or len({len(p) for p in self.points}) != 1:
                raise ValueError("Control points must be nonempty and of equal length")
        return self

    @property
    def m(self) -> int:
        return len(self.box.lo) if self.box is not None else len(self.points[0])


class TargetDocument(BaseModel):
    """Target set selection."""

    kind: Literal["free", "point", "hyperplane"] = Field("free", description="Target kind")
    point: Optional[List[float]] = Field(None, description="Target point (kind=point)")
    normal: Optional[List[float]] = Field(None, description="Hyperplane normal (kind=hyperplane)")
    offset: float = Field(0.0, description="Hyperplane offset: normal . x = offset")

    @model_validator(mode="after")
    def check_fields(self):
        if self.kind == "hyperplane" and not self.normal:
            raise ValueError("Hyperplane target needs 'normal'")
        return self


class TerminalCostDocument(BaseModel):
    """Quadratic terminal cost K(x) = weight/2 |x - reference|^2."""

    kind: Literal["quadratic"] = Field("quadratic", description="Terminal cost kind")
    weight: float = Field(1.0, description="Quadratic weight")
    reference: Optional[List[float]] = Field(None, description="Reference point (default origin)")


class TimeModeDocument(BaseModel):
    """Free or fixed terminal time."""

    mode: Literal["free", "fixed"] = Field("free", description="Terminal time handling")
    t1: Optional[float] = Field(None, description="Terminal time (mode=fixed)")

    @model_validator(mode="after")
    def check_t1(self):
        if self.mode == "fixed" and self.t1 is None:
            raise ValueError("Fixed terminal time needs 't1'")
        return self


class InitialGuessDocument(BaseModel):
    """Starting point for shooting."""

    lambda0: Optional[List[float]] = Field(None, description="Initial normal-chart costate")
    t1: Optional[float] = Field(None, description="Initial terminal time guess (free mode)")
    c: Optional[List[float]] = Field(None, description="Initial transversality multipliers")


class ToleranceDocument(BaseModel):
    """Per-problem solver overrides."""

    tol: Optional[float] = Field(None, gt=0, description="Residual tolerance")
    step: Optional[float] = Field(None, gt=0, description="RK4 step")
    max_iter: Optional[int] = Field(None, ge=1, description="Newton iterations")


class ProblemDocument(BaseModel):
    """A problem built from a registry dynamics family."""

    name: str = Field(..., min_length=1, description="Problem name")
    dynamics: str = Field(..., description="Registry key of the dynamics family")
    params: Dict[str, Any] = Field(default_factory=dict, description="Dynamics parameters")
    control_set: ControlSetDocument = Field(..., description="Admissible controls")
    x0: List[float] = Field(..., min_length=1, description="Initial state")
    t0: float = Field(0.0, description="Initial time")
    target: TargetDocument = Field(default_factory=TargetDocument, description="Target set")
    terminal_cost: Optional[TerminalCostDocument] = Field(None, description="Terminal cost")
    time_mode: TimeModeDocument = Field(default_factory=TimeModeDocument, description="Time mode")
    tolerances: ToleranceDocument = Field(default_factory=ToleranceDocument, description="Solver overrides")
    initial_guess: InitialGuessDocument = Field(default_factory=InitialGuessDocument,
                                                description="Shooting start")
    description: str = Field("", description="Free text")

    @field_validator("name")
    @classmethod
    def validate_name(cls, v):
        """Names become file stems; keep them simple."""
        v = v.strip()
        if not v or any(ch in v for ch in "/\\ "):
            raise ValueError("Name must be non-empty without spaces or path separators")
        return v


class RunConfig(BaseModel):
    """Validated command-line configuration."""

    subcommand: Literal["solve", "verify", "bench", "list"] = Field(..., description="Subcommand")
    problem: Optional[str] = Field(None, description="Built-in problem name or JSON path")
    x0: Optional[List[float]] = Field(None, description="Initial state override")
    t1: Optional[float] = Field(None, gt=0, description="Terminal time (fixed) or guess (free)")
    time_mode: Optional[Literal["free", "fixed"]] = Field(None, description="Time mode override")
    tol: Optional[float] = Field(None, gt=0, description="Residual tolerance")
    max_iter: Optional[int] = Field(None, ge=1, description="Newton iterations")
    step: Optional[float] = Field(None, gt=0, description="RK4 step")
    method: Optional[Literal["rk4", "rk45"]] = Field(None, description="Integrator")
    multistart: int = Field(1, ge=1, description="Number of starts")
    chart: Literal["normal", "abnormal", "auto"] = Field("auto", description="Chart policy")
    suites: List[str] = Field(default_factory=list, description="Verify suites (empty: all)")
    samples: Optional[int] = Field(None, ge=1, description="Samples per verify suite")
    seed: int = Field(0, description="Random seed for verify suites")
    out: Optional[str] = Field(None, description="Output directory")
    format: Literal["csv", "json"] = Field("json", description="Output format")

    @model_validator(mode="after")
    def check_problem(self):
        if self.subcommand == "solve" and not self.problem:
            raise ValueError("solve needs --problem")
        return self


class ShootingReport(BaseModel):
    """JSON solve report; no wall-clock fields."""

    schema_version: str = Field("1", serialization_alias="schema", description="Report schema version")
    problem: str
    converged: bool
    classification: str
    iterations: int
    unknowns: Dict[str, Any]
    residual: List[float]
    residual_blocks: Dict[str, float]
    residual_norm: float
    residual_history: List[float]
    cost: float
    t1: Optional[float]
    switch_times: List[float]
    diagnostics: Dict[str, Any] = Field(default_factory=dict)
    alternatives: List[Dict[str, Any]] = Field(default_factory=list)


__all__ = [
    "BoxDocument",
    "ControlSetDocument",
    "TargetDocument",
    "TerminalCostDocument",
    "TimeModeDocument",
    "InitialGuessDocument",
    "ToleranceDocument",
    "ProblemDocument",
    "RunConfig",
    "ShootingReport",
]
