"""
Projective costate value type.

A costate is an element [nu] of P(R^{n+1}) stored in one chart of an
explicit atlas:

    Normal(lambda)           represents [(-1, lambda_1, ..., lambda_n)]
    Abnormal(a, alpha)       represents [(alpha0, alpha_1, ..., alpha_n)], alpha_a = 1

alpha0 = nu0 / nu_a is zero at genuinely abnormal points; it is kept so that
the abnormal chart {nu_a != 0} is a full chart of projective space and
normal points can be expressed in it. Pivots are 1-based.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional, Sequence

import numpy as np

from utils.error_handlers import ValidationError


class ChartKind(str, Enum):
    """Chart of the projective atlas."""

    NORMAL = "normal"
    ABNORMAL = "abnormal"


@dataclass(frozen=True)
class ChartTag:
    """Normal, or Abnormal with a 1-based pivot."""

    kind: ChartKind
    pivot: Optional[int] = None

    @classmethod
    def normal(cls) -> 'ChartTag':
        return cls(ChartKind.NORMAL)

    @classmethod
    def abnormal(cls, pivot: int) -> 'ChartTag':
        return cls(ChartKind.ABNORMAL, int(pivot))

    def label(self) -> str:
        return "normal" if self.kind is ChartKind.NORMAL else f"abnormal:{self.pivot}"

    @classmethod
    def parse(cls, label: str) -> 'ChartTag':
        if label == "normal":
            return cls.normal()
        kind, _, pivot = label.partition(":")
        if kind != "abnormal" or not pivot.isdigit():
            raise ValidationError(f"Unknown chart label '{label}'", field="chart")
        return cls.abnormal(int(pivot))


@dataclass(frozen=True, eq=False)
class ProjectiveCostate:
    """A point of P(R^{n+1}) in chart coordinates."""

    chart: ChartTag
    coords: np.ndarray
    alpha0: float = 0.0

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float).reshape(-1).copy()
        if coords.size == 0:
            raise ValidationError("Costate needs at least one coordinate", field="coords")
        if not (np.all(np.isfinite(coords)) and np.isfinite(self.alpha0)):
            raise ValidationError("Costate coordinates must be finite", field="coords")
        if self.chart.kind is ChartKind.ABNORMAL:
            a = self.chart.pivot
            if a is None or not 1 <= a <= coords.size:
                raise ValidationError(f"Pivot {a} out of range 1..{coords.size}", field="pivot")
            if abs(coords[a - 1] - 1.0) > 1e-12:
                raise ValidationError("Abnormal coordinates must satisfy alpha_a = 1", field="alpha")
            coords[a - 1] = 1.0
        elif self.alpha0 != 0.0:
            raise ValidationError("alpha0 only applies to the abnormal chart", field="alpha0")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "alpha0", float(self.alpha0))

    @classmethod
    def normal(cls, lam: Sequence[float]) -> 'ProjectiveCostate':
        return cls(ChartTag.normal(), np.asarray(lam, dtype=float))

    @classmethod
    def abnormal(cls, pivot: int, alpha: Sequence[float], alpha0: float = 0.0) -> 'ProjectiveCostate':
        return cls(ChartTag.abnormal(pivot), np.asarray(alpha, dtype=float), alpha0)

    @property
    def n(self) -> int:
        return self.coords.size

    @property
    def is_normal(self) -> bool:
        return self.chart.kind is ChartKind.NORMAL

    @property
    def pivot(self) -> Optional[int]:
        return self.chart.pivot

    def homogeneous(self) -> np.ndarray:
        """Chart homogeneous vector: (-1, lambda) or (alpha0, alpha)."""
        head = -1.0 if self.is_normal else self.alpha0
        return np.concatenate(([head], self.coords))

    def to_dict(self) -> Dict[str, Any]:
        """Tagged record; abnormal pivots are 1-based."""
        if self.is_normal:
            return {"chart": "normal", "lambda": self.coords.tolist()}
        return {"chart": "abnormal", "pivot": self.chart.pivot,
                "alpha": self.coords.tolist(), "alpha0": self.alpha0}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ProjectiveCostate':
        chart = data.get("chart")
        if chart == "normal":
            return cls.normal(data["lambda"])
        if chart == "abnormal":
            return cls.abnormal(int(data["pivot"]), data["alpha"], float(data.get("alpha0", 0.0)))
        raise ValidationError(f"Unknown chart '{chart}'", field="chart")

    def __repr__(self) -> str:
        if self.is_normal:
            return f"Normal(lambda={self.coords.tolist()})"
        return f"Abnormal(pivot={self.chart.pivot}, alpha={self.coords.tolist()}, alpha0={self.alpha0})"


__all__ = ["ChartKind", "ChartTag", "ProjectiveCostate"]
