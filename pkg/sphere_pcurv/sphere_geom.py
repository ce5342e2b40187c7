"""
Sphere p-curvature - Spherical Primitives

Exact geometry of the unit sphere embedded in R^3: points, tangent vectors,
minimizing geodesic segments, rotations, Darboux frames and turning angles.
All angles are radians. Every type is an immutable value; every operation is
pure.
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy.spatial.transform import Rotation as _ScipyRotation

from .errors import InscriptionError, RangeError, ValidationError

UNIT_TOL = 1e-12
TANGENT_TOL = 1e-10
ANTIPODAL_MARGIN = 1e-9

ArrayLike3 = Union[Sequence[float], np.ndarray]


def _frozen(v: np.ndarray) -> np.ndarray:
    v = np.array(v, dtype=float)
    v.setflags(write=False)
    return v


def angle_between(a: np.ndarray, b: np.ndarray) -> float:
    """Unsigned angle between two 3-vectors, atan2 form (never NaN)."""
    return float(np.arctan2(np.linalg.norm(np.cross(a, b)), np.dot(a, b)))


def angles_between(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise unsigned angles between two (n, 3) arrays."""
    return np.arctan2(np.linalg.norm(np.cross(a, b), axis=-1), np.einsum("...i,...i->...", a, b))


# =============================================================================
# Points and tangent vectors
# =============================================================================

@dataclass(frozen=True, eq=False)
class SpherePoint:
    """A point of S^2, stored as a unit 3-vector."""
    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.shape != (3,):
            raise ValidationError(f"SpherePoint needs 3 coordinates, got shape {coords.shape}")
        norm = float(np.linalg.norm(coords))
        if abs(norm - 1.0) > UNIT_TOL:
            raise ValidationError(
                f"SpherePoint is not unit (norm {norm:.17g})", {"norm": norm}
            )
        object.__setattr__(self, "coords", _frozen(coords))

    @classmethod
    def from_vector(cls, v: ArrayLike3, renormalize: bool = True) -> "SpherePoint":
        """Build a point from any nonzero vector, renormalizing by default."""
        v = np.asarray(v, dtype=float)
        norm = float(np.linalg.norm(v))
        if norm == 0.0 or not np.isfinite(norm):
            raise ValidationError("Cannot place a zero or non-finite vector on the sphere")
        return cls(v / norm if renormalize else v)

    def __iter__(self):
        return iter(self.coords)

    def __repr__(self) -> str:
        x, y, z = self.coords
        return f"SpherePoint({x:.12g}, {y:.12g}, {z:.12g})"


PointLike = Union[SpherePoint, ArrayLike3]


def as_vector(p: PointLike) -> np.ndarray:
    """Coordinates of a SpherePoint or a raw 3-vector."""
    if isinstance(p, SpherePoint):
        return p.coords
    return np.asarray(p, dtype=float)


@dataclass(frozen=True, eq=False)
class TangentVector:
    """A vector in the tangent plane of S^2 at base."""
    base: SpherePoint
    dir: np.ndarray
    unit: bool = True

    def __post_init__(self):
        d = np.asarray(self.dir, dtype=float)
        if abs(float(np.dot(d, self.base.coords))) > TANGENT_TOL:
            raise ValidationError("Tangent direction is not orthogonal to its base point")
        if self.unit and abs(float(np.linalg.norm(d)) - 1.0) > TANGENT_TOL:
            raise ValidationError("Unit tangent direction does not have norm 1")
        object.__setattr__(self, "dir", _frozen(d))

    def rotated(self, rotation: "Rotation3") -> "TangentVector":
        return TangentVector(
            SpherePoint.from_vector(rotation.apply(self.base.coords)),
            rotation.apply(self.dir),
            self.unit,
        )


def tangent_toward(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Initial unit tangent at p of the minimizing geodesic to q."""
    w = q - np.dot(p, q) * p
    norm = float(np.linalg.norm(w))
    if norm == 0.0:
        raise ValidationError("Tangent direction undefined for coincident or antipodal points")
    return w / norm


def exp_map(p: np.ndarray, v: np.ndarray, s: Union[float, np.ndarray]) -> np.ndarray:
    """Point(s) at arc length s along the great circle from p with unit tangent v."""
    s = np.asarray(s, dtype=float)
    if s.ndim == 0:
        return np.cos(s) * p + np.sin(s) * v
    return np.cos(s)[:, None] * p[None, :] + np.sin(s)[:, None] * v[None, :]


# =============================================================================
# Geodesic segments
# =============================================================================

def geodesic_distance(p: PointLike, q: PointLike) -> float:
    """Great-circle distance in [0, pi]; symmetric and never NaN."""
    return angle_between(as_vector(p), as_vector(q))


@dataclass(frozen=True, eq=False)
class GeodesicSegment:
    """
    Minimizing great-circle arc from start to end.

    Zero-length segments are allowed when their direction is supplied; they
    appear where a bend consumes a whole polygonal edge.
    """
    start: SpherePoint
    end: SpherePoint
    length: float
    direction: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.length >= np.pi - ANTIPODAL_MARGIN:
            raise InscriptionError(
                "Geodesic segment endpoints are (nearly) antipodal",
                {"length": float(self.length)},
            )
        if self.direction is None:
            # coincident endpoints: direction stays undefined (zero vector)
            direction = (
                tangent_toward(self.start.coords, self.end.coords)
                if self.length > 0.0 else np.zeros(3)
            )
            object.__setattr__(self, "direction", _frozen(direction))
        else:
            object.__setattr__(self, "direction", _frozen(self.direction))

    @classmethod
    def between(cls, p: PointLike, q: PointLike) -> "GeodesicSegment":
        pv, qv = as_vector(p), as_vector(q)
        return cls(
            SpherePoint.from_vector(pv), SpherePoint.from_vector(qv), geodesic_distance(pv, qv)
        )

    @classmethod
    def from_direction(cls, start: PointLike, direction: np.ndarray, length: float) -> "GeodesicSegment":
        sv = as_vector(start)
        end = exp_map(sv, np.asarray(direction, dtype=float), length)
        return cls(SpherePoint.from_vector(sv), SpherePoint.from_vector(end), float(length), direction)

    def point_at(self, s: Union[float, np.ndarray]) -> np.ndarray:
        """Unchecked evaluation; s may leave [0, length]."""
        return exp_map(self.start.coords, self.direction, s)

    def tangent_at(self, s: Union[float, np.ndarray]) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if s.ndim == 0:
            return -np.sin(s) * self.start.coords + np.cos(s) * self.direction
        return -np.sin(s)[:, None] * self.start.coords + np.cos(s)[:, None] * self.direction

    def second_derivative_at(self, s: Union[float, np.ndarray]) -> np.ndarray:
        return -self.point_at(s)

    @property
    def curvature(self) -> float:
        return 0.0

    def start_tangent(self) -> TangentVector:
        return TangentVector(self.start, self.direction)

    def end_tangent(self) -> TangentVector:
        return TangentVector(self.end, self.tangent_at(self.length))

    def rotated(self, rotation: "Rotation3") -> "GeodesicSegment":
        return GeodesicSegment(
            SpherePoint.from_vector(rotation.apply(self.start.coords)),
            SpherePoint.from_vector(rotation.apply(self.end.coords)),
            self.length,
            rotation.apply(self.direction),
        )


def geodesic_point(seg: GeodesicSegment, s: float) -> SpherePoint:
    """Point at arc length s from seg.start; s must lie in [0, seg.length]."""
    if s < -UNIT_TOL or s > seg.length + UNIT_TOL:
        raise RangeError(
            f"Arc length {s} outside [0, {seg.length}]", {"s": s, "length": seg.length}
        )
    s = min(max(s, 0.0), seg.length)
    if s == 0.0:
        return seg.start
    if s == seg.length:
        return seg.end
    return SpherePoint.from_vector(seg.point_at(s))


# =============================================================================
# Rotations
# =============================================================================

@dataclass(frozen=True, eq=False)
class Rotation3:
    """Element of SO(3)."""
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValidationError(f"Rotation needs a 3x3 matrix, got {m.shape}")
        if np.max(np.abs(m.T @ m - np.eye(3))) > UNIT_TOL:
            raise ValidationError("Rotation matrix is not orthogonal")
        if abs(float(np.linalg.det(m)) - 1.0) > UNIT_TOL:
            raise ValidationError("Rotation matrix does not have determinant +1")
        object.__setattr__(self, "matrix", _frozen(m))

    @classmethod
    def identity(cls) -> "Rotation3":
        return cls(np.eye(3))

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Rotate a vector (3,) or a stack of vectors (n, 3)."""
        v = np.asarray(v, dtype=float)
        return v @ self.matrix.T

    def compose(self, other: "Rotation3") -> "Rotation3":
        """self after other."""
        return Rotation3(self.matrix @ other.matrix)

    def inverse(self) -> "Rotation3":
        return Rotation3(self.matrix.T)


def rotation_about_axis(axis: ArrayLike3, angle: float) -> Rotation3:
    """Right-handed rotation by angle about a unit axis (Rodrigues formula)."""
    axis = np.asarray(axis, dtype=float)
    if axis.shape != (3,) or abs(float(np.linalg.norm(axis)) - 1.0) > TANGENT_TOL:
        raise ValidationError("Rotation axis must be a unit 3-vector")
    k = np.array([
        [0.0, -axis[2], axis[1]],
        [axis[2], 0.0, -axis[0]],
        [-axis[1], axis[0], 0.0],
    ])
    return Rotation3(np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k))


def random_rotation(seed: int) -> Rotation3:
    """Uniformly random rotation, reproducible from seed."""
    return Rotation3(_ScipyRotation.random(random_state=seed).as_matrix())


def frame_from_columns(e1: np.ndarray, e2: np.ndarray, e3: np.ndarray) -> Rotation3:
    """Rotation whose columns are the given right-handed orthonormal triple."""
    return Rotation3(np.column_stack([e1, e2, e3]))


# =============================================================================
# Angles and frames
# =============================================================================

def turning_angle(incoming: TangentVector, outgoing: TangentVector) -> float:
    """Unsigned exterior angle in [0, pi] between two unit tangents at one point."""
    if np.max(np.abs(incoming.base.coords - outgoing.base.coords)) > TANGENT_TOL:
        raise ValidationError("Turning angle needs tangent vectors at the same base point")
    if not (incoming.unit and outgoing.unit):
        raise ValidationError("Turning angle needs unit tangent vectors")
    return angle_between(incoming.dir, outgoing.dir)


class DarbouxFrame(NamedTuple):
    """Tangent t, conormal u = n x t and outward normal n."""
    t: np.ndarray
    u: np.ndarray
    n: np.ndarray


def frame_at(p: SpherePoint, t: TangentVector) -> DarbouxFrame:
    """Right-handed orthonormal Darboux frame (t, u, n) with n = p."""
    if not t.unit or abs(float(np.linalg.norm(t.dir)) - 1.0) > TANGENT_TOL:
        raise ValidationError("Frame needs a unit tangent")
    if np.max(np.abs(t.base.coords - p.coords)) > TANGENT_TOL:
        raise ValidationError("Tangent is not based at the frame point")
    n = p.coords
    return DarbouxFrame(t=t.dir, u=np.cross(n, t.dir), n=n)
