"""
Trajectory models.

ControlSignal describes u(t) either as a piecewise-constant schedule or a
closed-form evaluator. SampledTrajectory holds a vector quantity on a time
grid (states, costate vectors or tangents). ContactState and
ExtremalTrajectory hold points and samples of the contact flow.
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from models.costate import ProjectiveCostate
from models.problem import ControlSet, ExtendedState, as_xhat
from utils.error_handlers import ValidationError


class ControlSignal:
    """Piecewise-constant schedule or closed-form u(t)."""

    def __init__(self, breakpoints: Sequence[float] = None, values: Sequence[Sequence[float]] = None,
                 func: Callable[[float], np.ndarray] = None, m: int = None):
        if func is not None:
            if m is None:
                raise ValidationError("Closed-form controls need the control dimension m", field="m")
            self.func = func
            self.breakpoints = None
            self.values = None
            self.m = int(m)
            return

        if breakpoints is None or values is None:
            raise ValidationError("Provide breakpoints and values, or a closed-form evaluator")
        bp = np.asarray(breakpoints, dtype=float).reshape(-1)
        vals = np.asarray(values, dtype=float)
        if vals.ndim == 1:
            vals = vals.reshape(-1, 1)
        if bp.size < 2 or vals.shape[0] != bp.size - 1:
            raise ValidationError(f"{bp.size} breakpoints need {bp.size - 1} values, got {vals.shape[0]}",
                                  field="values")
        if np.any(np.diff(bp) <= 0):
            raise ValidationError("Breakpoints must be strictly increasing", field="breakpoints")
        self.func = None
        self.breakpoints = bp
        self.values = vals
        self.m = vals.shape[1]

    @classmethod
    def constant(cls, u: Sequence[float], t0: float, t1: float) -> 'ControlSignal':
        return cls([t0, t1], [np.atleast_1d(np.asarray(u, dtype=float))])

    @classmethod
    def closed_form(cls, func: Callable[[float], np.ndarray], m: int) -> 'ControlSignal':
        return cls(func=func, m=m)

    def _index(self, t: float) -> int:
        i = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        return min(max(i, 0), len(self.values) - 1)

    def __call__(self, t: float) -> np.ndarray:
        if self.func is not None:
            return np.atleast_1d(np.asarray(self.func(t), dtype=float))
        return self.values[self._index(t)]

    def on_interval(self, a: float, b: float) -> Optional[np.ndarray]:
        """The constant value on [a, b] for piecewise controls, else None."""
        if self.func is not None:
            return None
        return self.values[self._index(0.5 * (a + b))]

    def segments(self, t_a: float, t_b: float) -> List[Tuple[float, float]]:
        """Split [t_a, t_b] (either orientation) at interior breakpoints."""
        lo, hi = min(t_a, t_b), max(t_a, t_b)
        cuts = [lo, hi]
        if self.breakpoints is not None:
            cuts += [t for t in self.breakpoints if lo < t < hi]
        cuts = sorted(set(cuts))
        pieces = list(zip(cuts[:-1], cuts[1:]))
        if t_b < t_a:
            pieces = [(b, a) for a, b in reversed(pieces)]
        return pieces

    def validate(self, control_set: ControlSet) -> None:
        """Raise ControlOutOfSet unless every schedule value lies in U."""
        if self.values is None:
            return
        for u in self.values:
            control_set.require(u)


@dataclass
class SampledTrajectory:
    """Vector-valued samples on a time grid, rows aligned with `times`."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float).reshape(-1)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.shape[0] != self.times.size:
            raise ValidationError("Sample count does not match the time grid", field="values")

    def __len__(self) -> int:
        return self.times.size

    @property
    def initial(self) -> np.ndarray:
        return self.values[0]

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]

    def reversed(self) -> 'SampledTrajectory':
        return SampledTrajectory(self.times[::-1].copy(), self.values[::-1].copy())

    def sorted(self) -> 'SampledTrajectory':
        """Ascending-time copy."""
        order = np.argsort(self.times, kind="stable")
        return SampledTrajectory(self.times[order], self.values[order])


@dataclass(frozen=True)
class ContactState:
    """A point (xhat, [nuhat]) of the projectivized cotangent bundle."""

    xhat: np.ndarray
    costate: ProjectiveCostate

    def __post_init__(self):
        xhat = as_xhat(self.xhat)
        if xhat.size != self.costate.n + 1:
            raise ValidationError(
                f"Extended state has {xhat.size} entries, costate expects {self.costate.n + 1}",
                field="xhat")
        if not np.all(np.isfinite(xhat)):
            raise ValidationError("Extended state entries must be finite", field="xhat")
        object.__setattr__(self, "xhat", xhat)

    @classmethod
    def of(cls, xhat, costate: ProjectiveCostate) -> 'ContactState':
        if isinstance(xhat, ExtendedState):
            xhat = xhat.as_array()
        return cls(np.asarray(xhat, dtype=float), costate)

    @property
    def n(self) -> int:
        return self.costate.n

    @property
    def x0(self) -> float:
        return float(self.xhat[0])

    @property
    def x(self) -> np.ndarray:
        return self.xhat[1:]

    def extended(self) -> ExtendedState:
        return ExtendedState.from_array(self.xhat)


@dataclass
class ExtremalTrajectory:
    """Samples (t, xhat, [nuhat], u) of an extremal with diagnostics."""

    times: np.ndarray
    states: List[ContactState]
    controls: np.ndarray
    h_values: np.ndarray
    switch_times: List[float] = field(default_factory=list)
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    # +-1 per sample: the flow's covector is orientation * costate.homogeneous()
    orientation: Optional[np.ndarray] = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float).reshape(-1)
        controls = np.asarray(self.controls, dtype=float)
        self.controls = (np.zeros((self.times.size, 0)) if controls.size == 0
                         else controls.reshape(self.times.size, -1))
        self.h_values = np.asarray(self.h_values, dtype=float).reshape(-1)
        if self.orientation is None:
            self.orientation = np.ones(self.times.size)
        self.orientation = np.asarray(self.orientation, dtype=float).reshape(-1)
        if not (len(self.states) == self.times.size == self.h_values.size == self.orientation.size):
            raise ValidationError("Extremal samples are misaligned", field="samples")

    def __len__(self) -> int:
        return self.times.size

    @property
    def n(self) -> int:
        return self.states[0].n

    @property
    def initial(self) -> ContactState:
        return self.states[0]

    @property
    def final(self) -> ContactState:
        return self.states[-1]

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    def xhat_array(self) -> np.ndarray:
        return np.stack([s.xhat for s in self.states])

    def charts(self) -> List[str]:
        return [s.costate.chart.label() for s in self.states]

    def control_signal(self) -> ControlSignal:
        """Piecewise-constant control holding each sample value until the next sample."""
        if self.times.size < 2:
            return ControlSignal.constant(self.controls[0], self.t0, self.t0 + 1.0)
        return ControlSignal(self.times, self.controls[:-1])

    def to_frame(self) -> pd.DataFrame:
        """Columns t, x0, x1..xn, chart, c1..cn, h_value."""
        n = self.n
        data: Dict[str, Any] = {"t": self.times}
        xhat = self.xhat_array()
        data["x0"] = xhat[:, 0]
        for i in range(n):
            data[f"x{i + 1}"] = xhat[:, i + 1]
        data["chart"] = self.charts()
        coords = np.stack([s.costate.coords for s in self.states])
        for i in range(n):
            data[f"c{i + 1}"] = coords[:, i]
        data["h_value"] = self.h_values
        return pd.DataFrame(data)


__all__ = [
    "ControlSignal",
    "SampledTrajectory",
    "ContactState",
    "ExtremalTrajectory",
]
