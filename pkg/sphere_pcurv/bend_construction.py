"""
Sphere p-curvature - Bends and the Glued Curve

Each polygonal corner is replaced by an arc of a small circle (constant
geodesic curvature) tangent to both trimmed edges, giving the C^1 curve
gamma(P). The construction is done once in a canonical frame (vertex at
the north pole, edges symmetric about the plane y = 0, left turn) and
carried to every vertex by an isometry.

Canonical quantities for half-length delta and turning angle theta:

    K = sin(theta/2), S = -cos(theta/2), s = sin(delta), c = cos(delta)
    root = sqrt(s^2 + K^2 c^2)
    tau = K c / root, sigma = s / root
    cos(Phi) = K / root, sin(Phi) = -S s / root
    extent = 2 atan2(root, -S c)
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid

from .errors import BendConstructionError, RangeError, SingularAngleError, ValidationError
from .export import write_csv
from .polygonal import Polygonal, euclidean_p_rotation
from .sphere_geom import (
    TANGENT_TOL,
    GeodesicSegment,
    Rotation3,
    angle_between,
    frame_from_columns,
)

logger = logging.getLogger(__name__)

THETA_TOL = 1e-12
SINGULAR_MARGIN = 1e-6
POINT_TOL = 1e-10
JUNCTION_TOL = 1e-8

E3 = np.array([0.0, 0.0, 1.0])

GAMMA_HEADER = ["s", "x", "y", "z", "k"]


# =============================================================================
# Bend arcs
# =============================================================================

@dataclass(frozen=True, eq=False)
class BendArc:
    """
    Arc of the circle at angle colatitude from axis:

        x(phi) = cos(Phi) axis + sin(Phi) (cos(phi) ref + sin(phi) axis x ref)

    for phi from angle_start to angle_end (increasing). Evaluation is by
    arc length s from the start.
    """
    axis: np.ndarray
    ref: np.ndarray
    colatitude: float
    angle_start: float
    angle_end: float

    def __post_init__(self):
        if not (0.0 < self.colatitude < np.pi):
            raise ValidationError(f"Bend colatitude must lie in (0, pi), got {self.colatitude}")
        if self.angle_end < self.angle_start:
            raise ValidationError("Bend angles must increase along the arc")
        if abs(float(np.dot(self.axis, self.ref))) > TANGENT_TOL:
            raise ValidationError("Bend reference direction is not orthogonal to the axis")

    @property
    def radius(self) -> float:
        return float(np.sin(self.colatitude))

    @property
    def extent(self) -> float:
        return self.angle_end - self.angle_start

    @property
    def length(self) -> float:
        return self.extent * self.radius

    @property
    def curvature(self) -> float:
        """|cot(Phi)|, constant along the arc."""
        return float(abs(np.cos(self.colatitude)) / np.sin(self.colatitude))

    @property
    def binormal(self) -> np.ndarray:
        return np.cross(self.axis, self.ref)

    def _angles(self, s):
        return self.angle_start + np.asarray(s, dtype=float) / self.radius

    def _circle(self, phi: np.ndarray) -> np.ndarray:
        if phi.ndim == 0:
            return np.cos(phi) * self.ref + np.sin(phi) * self.binormal
        return np.cos(phi)[:, None] * self.ref + np.sin(phi)[:, None] * self.binormal

    def point_at(self, s):
        return np.cos(self.colatitude) * self.axis + self.radius * self._circle(self._angles(s))

    def tangent_at(self, s):
        phi = self._angles(s)
        return self._circle(phi + np.pi / 2.0)

    def second_derivative_at(self, s):
        return -self._circle(self._angles(s)) / self.radius

    def rotated(self, rotation: Rotation3) -> "BendArc":
        return BendArc(
            axis=rotation.apply(self.axis),
            ref=rotation.apply(self.ref),
            colatitude=self.colatitude,
            angle_start=self.angle_start,
            angle_end=self.angle_end,
        )

    def reversed(self) -> "BendArc":
        """The same arc traversed from its end to its start."""
        return BendArc(
            axis=-self.axis,
            ref=self.ref,
            colatitude=np.pi - self.colatitude,
            angle_start=-self.angle_end,
            angle_end=-self.angle_start,
        )


Piece = Union[GeodesicSegment, BendArc]


class CanonicalBend(NamedTuple):
    """Bend in the canonical frame with the trim points and edge tangents there."""
    arc: Optional[BendArc]
    trim_in: np.ndarray
    trim_out: np.ndarray
    tangent_in: np.ndarray
    tangent_out: np.ndarray


def canonical_tangents(theta: float) -> Tuple[np.ndarray, np.ndarray]:
    """Incoming and outgoing unit tangents at the north pole for a left turn by theta."""
    half = theta / 2.0
    return (
        np.array([-np.sin(half), -np.cos(half), 0.0]),
        np.array([np.sin(half), -np.cos(half), 0.0]),
    )


def canonical_bend(ell_half: float, theta: float) -> CanonicalBend:
    delta = float(ell_half)
    if not (0.0 < delta < np.pi / 2.0):
        raise RangeError(f"Bend half-length must lie in (0, pi/2), got {delta}", {"delta": delta})
    if theta < 0.0:
        raise RangeError(f"Turning angle must be nonnegative, got {theta}")
    if theta >= np.pi - SINGULAR_MARGIN:
        raise SingularAngleError(f"Turning angle {theta} too close to pi for a bend", {"theta": theta})

    t_in, t_out = canonical_tangents(theta)
    s, c = np.sin(delta), np.cos(delta)
    trim_in = c * E3 - s * t_in
    trim_out = c * E3 + s * t_out
    tangent_in = s * E3 + c * t_in
    tangent_out = -s * E3 + c * t_out
    if theta <= THETA_TOL:
        return CanonicalBend(None, trim_in, trim_out, tangent_in, tangent_out)

    K = np.sin(theta / 2.0)
    S = -np.cos(theta / 2.0)
    root = np.sqrt(s * s + K * K * c * c)
    tau, sigma = K * c / root, s / root
    colatitude = float(np.arctan2(-S * s, K))
    extent = 2.0 * np.arctan2(root, -S * c)

    # rows of the rotation [[tau, 0, -sigma], [0, 1, 0], [sigma, 0, tau]]
    axis = np.array([sigma, 0.0, tau])
    ref = np.array([tau, 0.0, -sigma])
    x_rot = float(np.dot(ref, trim_in))
    y_rot = float(trim_in[1])
    angle_start = float(np.arctan2(y_rot, x_rot))
    arc = BendArc(axis, ref, colatitude, angle_start, angle_start + extent)

    _check_matching(arc, trim_in, trim_out, tangent_in, tangent_out, POINT_TOL)
    return CanonicalBend(arc, trim_in, trim_out, tangent_in, tangent_out)


def _check_matching(arc: BendArc, p_in, p_out, v_in, v_out, tol: float) -> None:
    mismatches = {
        "start_point": float(np.max(np.abs(arc.point_at(0.0) - p_in))),
        "end_point": float(np.max(np.abs(arc.point_at(arc.length) - p_out))),
        "start_tangent": float(np.max(np.abs(arc.tangent_at(0.0) - v_in))),
        "end_tangent": float(np.max(np.abs(arc.tangent_at(arc.length) - v_out))),
    }
    worst = max(mismatches.values())
    if worst > tol:
        raise BendConstructionError(f"Bend does not match the trimmed edges (mismatch {worst:.3e})", mismatches)


# =============================================================================
# Vertex frames and the glued curve
# =============================================================================

@dataclass(frozen=True, eq=False)
class VertexBendSpec:
    """
    Placement of one bend: local_frame maps the canonical configuration to
    the world. Right turns are built on the reversed traversal.
    """
    half_length: float
    theta: float
    local_frame: Rotation3
    right_turn: bool = False


def vertex_frame(vertex: np.ndarray, t_in: np.ndarray, t_out: np.ndarray) -> Tuple[Rotation3, bool]:
    """Rotation taking the canonical vertex to the world vertex, and whether the turn is to the right."""
    n = vertex / np.linalg.norm(vertex)
    right_turn = float(np.dot(np.cross(t_in, t_out), n)) < 0.0
    if right_turn:
        t_in, t_out = -t_out, -t_in
    # bisector projected onto the tangent plane; theta < pi keeps it nonzero
    e2 = -(t_in + t_out)
    e2 = e2 - np.dot(e2, n) * n
    e2 = e2 / np.linalg.norm(e2)
    return frame_from_columns(np.cross(e2, n), e2, n), right_turn


@dataclass(frozen=True, eq=False)
class GluedCurve:
    """Geodesic pieces and bend arcs joined C^1, in traversal order."""
    pieces: Tuple[Piece, ...]

    @property
    def length(self) -> float:
        return float(sum(piece.length for piece in self.pieces))

    @property
    def bends(self) -> List[BendArc]:
        return [piece for piece in self.pieces if isinstance(piece, BendArc)]

    @property
    def junction_count(self) -> int:
        return len(self.pieces) - 1

    @property
    def junction_tangents(self) -> List[Tuple[np.ndarray, np.ndarray]]:
        return [
            (a.tangent_at(a.length), b.tangent_at(0.0))
            for a, b in zip(self.pieces[:-1], self.pieces[1:])
        ]

    def max_junction_mismatch(self) -> float:
        """Largest angle between the tangents meeting at a junction."""
        return max((angle_between(a, b) for a, b in self.junction_tangents), default=0.0)

    def max_junction_gap(self) -> float:
        gaps = [
            float(np.linalg.norm(a.point_at(a.length) - b.point_at(0.0)))
            for a, b in zip(self.pieces[:-1], self.pieces[1:])
        ]
        return max(gaps, default=0.0)

    def piece_grids(self, n: int) -> List[Tuple[Piece, np.ndarray, float]]:
        """Per piece: (piece, local arc lengths, offset), about n points in total."""
        total = self.length
        grids = []
        offset = 0.0
        for piece in self.pieces:
            count = max(2, int(round(n * piece.length / total))) if total > 0.0 else 2
            grids.append((piece, np.linspace(0.0, piece.length, count), offset))
            offset += piece.length
        return grids

    def sample(self, n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        About n samples (s, points, k) spread by length, piece endpoints included.

        k is ||x'' + x|| from each piece's analytic second derivative.
        """
        s_all, x_all, k_all = [], [], []
        for piece, s, offset in self.piece_grids(n):
            x = piece.point_at(s)
            s_all.append(offset + s)
            x_all.append(x)
            k_all.append(np.linalg.norm(piece.second_derivative_at(s) + x, axis=1))
        return np.concatenate(s_all), np.vstack(x_all), np.concatenate(k_all)

    def rotated(self, rotation: Rotation3) -> "GluedCurve":
        return GluedCurve(tuple(piece.rotated(rotation) for piece in self.pieces))


def vertex_bend_specs(P: Polygonal) -> List[VertexBendSpec]:
    lengths = P.edge_lengths
    if np.any(lengths <= 0.0):
        raise ValidationError("Bends need a polygonal without zero-length edges")
    specs = []
    for i in range(1, P.h):
        incoming, outgoing = P.edges[i - 1], P.edges[i]
        t_in = incoming.tangent_at(incoming.length)
        t_out = outgoing.direction
        theta = angle_between(t_in, t_out)
        if theta >= np.pi - SINGULAR_MARGIN:
            raise SingularAngleError(f"Turning angle at vertex {i} is too close to pi", {"vertex": i, "theta": theta})
        frame, right_turn = (
            vertex_frame(P.vertices[i].coords, t_in, t_out) if theta > THETA_TOL
            else (Rotation3.identity(), False)
        )
        specs.append(VertexBendSpec(
            half_length=0.5 * min(lengths[i - 1], lengths[i]),
            theta=theta,
            local_frame=frame,
            right_turn=right_turn,
        ))
    return specs


def _world_bend(spec: VertexBendSpec) -> Optional[BendArc]:
    if spec.theta <= THETA_TOL:
        return None
    arc = canonical_bend(spec.half_length, spec.theta).arc.rotated(spec.local_frame)
    return arc.reversed() if spec.right_turn else arc


def build_gamma(P: Polygonal) -> GluedCurve:
    """Glue bends into the polygonal at every turning interior vertex."""
    specs = vertex_bend_specs(P)
    trims = [0.0] + [spec.half_length if spec.theta > THETA_TOL else 0.0 for spec in specs] + [0.0]
    bends = [_world_bend(spec) for spec in specs]

    pieces: List[Piece] = []
    for j, edge in enumerate(P.edges):
        head, tail = trims[j], trims[j + 1]
        remaining = edge.length - head - tail
        if remaining < -POINT_TOL:
            raise BendConstructionError(
                f"Trims overlap on edge {j}", {"edge": j, "length": edge.length, "head": head, "tail": tail}
            )
        pieces.append(GeodesicSegment.from_direction(
            edge.point_at(head), edge.tangent_at(head), max(remaining, 0.0)
        ))
        if j < len(bends) and bends[j] is not None:
            pieces.append(bends[j])

    gamma = GluedCurve(tuple(pieces))
    gap, mismatch = gamma.max_junction_gap(), gamma.max_junction_mismatch()
    if gap > POINT_TOL or mismatch > JUNCTION_TOL:
        raise BendConstructionError(
            "Glued curve is not C^1 at a junction", {"max_gap": gap, "max_tangent_mismatch": mismatch}
        )
    logger.debug("Glued %d pieces (%d bends), max tangent mismatch %.3e",
                 len(pieces), len(gamma.bends), mismatch)
    return gamma


# =============================================================================
# p-rotation
# =============================================================================

def _check_p(p: float) -> None:
    if p < 1.0:
        raise RangeError(f"Exponent p must be at least 1, got {p}")


def fp_closed_form(ell: float, theta: float, p: float) -> float:
    """p-rotation of one bend of an equilateral corner with edges ell and angle theta."""
    _check_p(p)
    if not (0.0 < ell < np.pi):
        raise RangeError(f"Edge length must lie in (0, pi), got {ell}")
    if theta < 0.0:
        raise RangeError(f"Turning angle must be nonnegative, got {theta}")
    if theta >= np.pi:
        raise SingularAngleError("The p-rotation diverges at turning angle pi", {"theta": theta})
    if theta == 0.0:
        return 0.0
    sh, ch = np.sin(theta / 2.0), np.cos(theta / 2.0)
    sl, cl = np.sin(ell / 2.0), np.cos(ell / 2.0)
    psi = np.sqrt(sl * sl + sh * sh * cl * cl)
    return float(2.0 * np.arctan2(psi, ch * cl) / psi * sh ** p / (ch * sl) ** (p - 1.0))


def p_rotation_of(gamma: GluedCurve, p: float) -> float:
    _check_p(p)
    return float(sum(bend.curvature ** p * bend.length for bend in gamma.bends))


def p_rotation(P: Polygonal, p: float) -> float:
    """Integral of |k|^p over gamma(P), exact per bend."""
    return p_rotation_of(build_gamma(P), p)


def brute_force_kp(gamma: GluedCurve, p: float, n: int = 10_000) -> float:
    """Trapezoid rule of |k|^p over dense samples of each piece."""
    _check_p(p)
    total = 0.0
    for piece, s, _ in gamma.piece_grids(n):
        k = np.linalg.norm(piece.second_derivative_at(s) + piece.point_at(s), axis=1)
        total += float(trapezoid(k ** p, s))
    return total


def length_ratio(P: Polygonal) -> float:
    """Length of gamma(P) over the length of P."""
    return build_gamma(P).length / P.length


def euclidean_fillet_value(ell: float, theta: float, p: float) -> float:
    """(ell/2)^(1-p) theta tan^(p-1)(theta/2), the planar fillet of one corner."""
    return euclidean_p_rotation(ell, [theta], p)


def corner_polygonal(ell: float, theta: float, left: bool = True) -> Polygonal:
    """Two edges of length ell meeting at the north pole with turning angle theta."""
    t_in, t_out = canonical_tangents(theta)
    if not left:
        mirror = np.array([-1.0, 1.0, 1.0])
        t_in, t_out = t_in * mirror, t_out * mirror
    start = np.cos(ell) * E3 - np.sin(ell) * t_in
    end = np.cos(ell) * E3 + np.sin(ell) * t_out
    return Polygonal.from_vertices([start, E3, end])


# =============================================================================
# Export
# =============================================================================

def gamma_rows(gamma: GluedCurve, n: int) -> List[list]:
    rows = []
    for piece, s, offset in gamma.piece_grids(n):
        for si, xi in zip(s, piece.point_at(s)):
            rows.append([float(offset + si), float(xi[0]), float(xi[1]), float(xi[2]), piece.curvature])
    return rows


def write_gamma_csv(gamma: GluedCurve, path: Union[str, Path], n: int = 2000) -> Path:
    return write_csv(path, GAMMA_HEADER, gamma_rows(gamma, n),
                     meta={"length": gamma.length, "pieces": len(gamma.pieces)})
