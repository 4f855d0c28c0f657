"""Pure vector mathematics: similarity/distance measures and 2-D plane projection.

All functions accept anything convertible to a 1-D float array and do their
arithmetic in double precision. Nothing here mutates its inputs; everything is
safe for unrestricted parallel use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GeometryError",
    "DimensionMismatch",
    "DegenerateVector",
    "ParallelInputs",
    "DegenerateProjection",
    "MEASURES",
    "polarity",
    "measure",
    "PlaneBasis",
    "plane_basis",
    "project",
    "AnglePair",
    "angle_between",
    "normalized_angles",
    "as_vector",
]


class GeometryError(ValueError):
    """Base class for geometric precondition failures."""


class DimensionMismatch(GeometryError):
    pass


class DegenerateVector(GeometryError):
    pass


class ParallelInputs(GeometryError):
    pass


class DegenerateProjection(GeometryError):
    pass


# Relative residual below which two vectors count as collinear, and a
# projection counts as vanishing. Sized for double precision over 4096-dim
# vectors.
PARALLEL_TOL = 1e-8
PROJECTION_TOL = 1e-8

MEASURES = ("cosine", "dot", "l1", "l2", "ned")

_DISTANCE_KINDS = frozenset({"l1", "l2", "ned"})


def polarity(kind: str) -> str:
    """Return "similarity" (higher = closer) or "distance" (lower = closer)."""
    if kind in ("cosine", "dot"):
        return "similarity"
    if kind in _DISTANCE_KINDS:
        return "distance"
    raise ValueError(f"unknown measure kind: {kind!r}")


def as_vector(values) -> np.ndarray:
    """Validate and convert to a 1-D float64 array (finite entries, dim >= 2)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatch(f"expected a 1-D vector, got shape {arr.shape}")
    if arr.size < 2:
        raise DimensionMismatch(f"vector dimension must be >= 2, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise DegenerateVector("vector has non-finite entries")
    return arr


def _pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    xv = as_vector(x)
    yv = as_vector(y)
    if xv.size != yv.size:
        raise DimensionMismatch(f"dimension mismatch: {xv.size} vs {yv.size}")
    return xv, yv


def measure(kind: str, x, y) -> float:
    """Evaluate one of the five measures between two vectors.

    cosine is computed on pre-normalized copies so that it is exactly
    invariant under power-of-two rescaling of either argument. ned follows
    the normalized squared Euclidean distance definition:
    0.5 * ||(x - mean(x)) - (y - mean(y))||^2 / (||x - mean(x)||^2 + ||y - mean(y)||^2)
    """
    xv, yv = _pair(x, y)
    if kind == "cosine":
        nx = float(np.linalg.norm(xv))
        ny = float(np.linalg.norm(yv))
        if nx == 0.0 or ny == 0.0:
            raise DegenerateVector("cosine undefined for zero vector")
        # clamp: rounding can push the normalized dot an ulp past +/-1
        return min(1.0, max(-1.0, float(np.dot(xv / nx, yv / ny))))
    if kind == "dot":
        return float(np.dot(xv, yv))
    if kind == "l1":
        return float(np.sum(np.abs(xv - yv)))
    if kind == "l2":
        return float(np.linalg.norm(xv - yv))
    if kind == "ned":
        cx = xv - xv.mean()
        cy = yv - yv.mean()
        sx = float(np.dot(cx, cx))
        sy = float(np.dot(cy, cy))
        if sx == 0.0 or sy == 0.0:
            raise DegenerateVector("ned undefined for constant vector")
        diff = cx - cy
        return 0.5 * float(np.dot(diff, diff)) / (sx + sy)
    raise ValueError(f"unknown measure kind: {kind!r}")


@dataclass(frozen=True)
class PlaneBasis:
    """Orthonormal basis of the plane spanned by two source vectors.

    b1 points along the first source vector; b2 is the normalized residual of
    the second after Gram-Schmidt removal of its b1 component.
    """

    b1: np.ndarray
    b2: np.ndarray
    source_x_norm: float
    source_y_norm: float


def plane_basis(x, y) -> PlaneBasis:
    """Orthonormal basis for span{x, y} via Gram-Schmidt.

    Raises ParallelInputs when the residual of y is below PARALLEL_TOL
    relative to ||y|| (plane undefined).
    """
    xv, yv = _pair(x, y)
    nx = float(np.linalg.norm(xv))
    ny = float(np.linalg.norm(yv))
    if nx == 0.0 or ny == 0.0:
        raise DegenerateVector("plane basis requires nonzero vectors")
    b1 = xv / nx
    resid = yv - np.dot(yv, b1) * b1
    rnorm = float(np.linalg.norm(resid))
    if rnorm <= PARALLEL_TOL * ny:
        raise ParallelInputs("input vectors are (near-)collinear; plane undefined")
    # second Gram-Schmidt pass: near-parallel inputs leave a residual whose
    # rounding error is amplified by 1/sin(angle), so re-orthogonalize to
    # keep b1.b2 at machine precision
    resid -= np.dot(resid, b1) * b1
    b2 = resid / float(np.linalg.norm(resid))
    return PlaneBasis(b1=b1, b2=b2, source_x_norm=nx, source_y_norm=ny)


def project(v, basis: PlaneBasis) -> np.ndarray:
    """Orthogonal projection of v onto the plane: (v.b1) b1 + (v.b2) b2."""
    vv = as_vector(v)
    if vv.size != basis.b1.size:
        raise DimensionMismatch(f"dimension mismatch: {vv.size} vs {basis.b1.size}")
    return np.dot(vv, basis.b1) * basis.b1 + np.dot(vv, basis.b2) * basis.b2


def angle_between(x, y) -> float:
    """Angle in [0, pi] between two nonzero vectors (arccos of clamped cosine)."""
    c = measure("cosine", x, y)
    return math.acos(min(1.0, max(-1.0, c)))


@dataclass(frozen=True)
class AnglePair:
    """In-plane angles of a projected vector, normalized so angle(x, y) == 1.

    t_a and t_b are the in-plane angular distances of the projection from x
    and y divided by angle(x, y). signed_theta is the signed in-plane angle
    from b1 (x direction), positive toward y.
    """

    t_a: float
    t_b: float
    signed_theta: float


def normalized_angles(v_proj, basis: PlaneBasis, x, y) -> AnglePair:
    """Normalized in-plane angles of an already-projected vector.

    The angles are taken in the plane (from the two plane coordinates), so
    the classification identities hold exactly: t_a + t_b == 1 iff the
    projection falls inside the angular cone of x and y.
    """
    vv = as_vector(v_proj)
    gamma = angle_between(x, y)
    if not 0.0 < gamma < math.pi:
        raise ParallelInputs("angle between x and y must be strictly inside (0, pi)")
    c1 = float(np.dot(vv, basis.b1))
    c2 = float(np.dot(vv, basis.b2))
    if c1 == 0.0 and c2 == 0.0:
        raise DegenerateProjection("projection has no in-plane component")
    theta = math.atan2(c2, c1)
    t_a = abs(theta) / gamma
    t_b = abs(theta - gamma) / gamma
    return AnglePair(t_a=t_a, t_b=t_b, signed_theta=theta)
