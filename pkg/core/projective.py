"""
Projective costate arithmetic.

Equivalence classes of nonzero covectors nuhat = (nu0, nu_1, ..., nu_n)
under nonzero scaling, the normal/abnormal chart atlas, chart conversion and
representative selection under the nu0 <= 0 convention.
"""

from typing import Sequence

import numpy as np

from models.costate import ChartKind, ChartTag, ProjectiveCostate
from utils.error_handlers import ChartSingularity, ValidationError, ZeroCostate
from utils.settings import chart_config


def costate_vector(nu: Sequence[float]) -> np.ndarray:
    """Validate a CostateVector: finite, at least two entries, not all zero."""
    nu = np.asarray(nu, dtype=float).reshape(-1)
    if nu.size < 2:
        raise ValidationError("A costate vector needs n+1 >= 2 entries", field="nu")
    if not np.all(np.isfinite(nu)):
        raise ValidationError("Costate vector entries must be finite", field="nu")
    if np.max(np.abs(nu)) <= chart_config.zero_tol:
        raise ZeroCostate("The zero covector has no projective class")
    return nu


def from_vector(nu: Sequence[float], eps0: float = None) -> ProjectiveCostate:
    """
    Classify a covector into the atlas.

    Normal when |nu0| > eps0 * max_i |nu_i| (lambda = -nu/nu0), otherwise
    Abnormal with pivot argmax_i |nu_i| (smallest index on ties).
    """
    eps0 = chart_config.eps0 if eps0 is None else eps0
    if not eps0 > 0:
        raise ValidationError("eps0 must be positive", field="eps0")
    nu = costate_vector(nu)
    nu0, rest = nu[0], nu[1:]
    scale = np.max(np.abs(rest))
    if abs(nu0) > eps0 * scale:
        return ProjectiveCostate.normal(-rest / nu0)
    a = int(np.argmax(np.abs(rest)))
    alpha = rest / rest[a]
    alpha[a] = 1.0
    return ProjectiveCostate.abnormal(a + 1, alpha, nu0 / rest[a])


def representative(pc: ProjectiveCostate) -> np.ndarray:
    """Full covector with nu0 <= 0: (-1, lambda) or +-(alpha0, alpha)."""
    vec = pc.homogeneous()
    if vec[0] > 0:
        vec = -vec
    return vec


def _direction(vec: np.ndarray) -> np.ndarray:
    return vec / np.linalg.norm(vec)


def projectively_equal(p: ProjectiveCostate, q: ProjectiveCostate, tol: float = 1e-9) -> bool:
    """True iff the normalized representatives agree up to sign within tol."""
    if not tol > 0:
        raise ValidationError("tol must be positive", field="tol")
    u = _direction(representative(p))
    v = _direction(representative(q))
    if u.size != v.size:
        return False
    return bool(min(np.linalg.norm(u - v), np.linalg.norm(u + v)) <= tol)


def vectors_projectively_equal(u: Sequence[float], v: Sequence[float], tol: float = 1e-9) -> bool:
    """projectively_equal for raw covectors."""
    u = _direction(costate_vector(u))
    v = _direction(costate_vector(v))
    return bool(min(np.linalg.norm(u - v), np.linalg.norm(u + v)) <= tol)


def _outside(value: float, vec: np.ndarray) -> bool:
    return abs(value) <= chart_config.singularity_tol * np.max(np.abs(vec))


def chart_from_vector(vec: Sequence[float], target: ChartTag) -> ProjectiveCostate:
    """Express a covector in a given chart."""
    vec = costate_vector(vec)
    if target.kind is ChartKind.NORMAL:
        if _outside(vec[0], vec):
            raise ChartSingularity("Point lies on the normal chart singularity (nu0 = 0)")
        return ProjectiveCostate.normal(-vec[1:] / vec[0])
    a = target.pivot
    if a is None or not 1 <= a < vec.size:
        raise ValidationError(f"Pivot {a} out of range 1..{vec.size - 1}", field="pivot")
    if _outside(vec[a], vec):
        raise ChartSingularity(f"Point lies outside abnormal chart {a} (nu_{a} = 0)")
    alpha = vec[1:] / vec[a]
    alpha[a - 1] = 1.0
    return ProjectiveCostate.abnormal(a, alpha, vec[0] / vec[a])


def switch_chart(pc: ProjectiveCostate, target: ChartTag) -> ProjectiveCostate:
    """Re-express pc in the target chart; raises ChartSingularity outside it."""
    if pc.chart == target:
        return pc
    return chart_from_vector(pc.homogeneous(), target)


def preferred_chart(pc: ProjectiveCostate, eps0: float = None) -> ChartTag:
    """The chart from_vector would select for this point."""
    return from_vector(pc.homogeneous(), eps0).chart


def hyperplane_contains(pc: ProjectiveCostate, w: Sequence[float], tol: float = 1e-12) -> bool:
    """True iff w lies in the hyperplane ker(nuhat) within relative tol."""
    if not tol > 0:
        raise ValidationError("tol must be positive", field="tol")
    nu = representative(pc)
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.size != nu.size:
        raise ValidationError(f"Tangent has {w.size} entries, expected {nu.size}", field="w")
    return bool(abs(nu @ w) <= tol * np.linalg.norm(nu) * np.linalg.norm(w))


__all__ = [
    "costate_vector",
    "from_vector",
    "representative",
    "projectively_equal",
    "vectors_projectively_equal",
    "chart_from_vector",
    "switch_chart",
    "preferred_chart",
    "hyperplane_contains",
]
