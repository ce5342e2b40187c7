"""
Sphere p-curvature - Inscribed Geodesic Polygonals

Construction of polygonals inscribed in a ParamCurve (at given times or by
equilateral marching), their mesh and modulus, the intrinsic rotation and
the Euclidean p-rotation used for comparison.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq
from scipy.spatial.distance import pdist

from .config import get_config
from .curve_model import ParamCurve
from .errors import (
    InscriptionError,
    MarchingError,
    RangeError,
    SingularAngleError,
    ValidationError,
)
from .export import parse_float, read_csv, write_csv
from .sphere_geom import (
    TANGENT_TOL,
    GeodesicSegment,
    Rotation3,
    SpherePoint,
    angle_between,
)

logger = logging.getLogger(__name__)

TIME_TOL = 1e-12
SCAN_FRACTION = 1.0 / 16.0

POLYGONAL_HEADER = ["i", "t", "x", "y", "z", "edge_length", "theta"]


@dataclass(frozen=True, eq=False)
class Polygonal:
    """
    Geodesic polygonal with vertices c(t_0), ..., c(t_h).

    times is None for polygonals built directly from vertices.
    """
    vertices: Tuple[SpherePoint, ...]
    edges: Tuple[GeodesicSegment, ...]
    times: Optional[np.ndarray] = None

    def __post_init__(self):
        if len(self.vertices) < 2:
            raise ValidationError("A polygonal needs at least two vertices")
        if len(self.edges) != len(self.vertices) - 1:
            raise ValidationError("Polygonal edge count must be vertex count minus one")
        if self.times is not None:
            times = np.array(self.times, dtype=float)
            times.setflags(write=False)
            object.__setattr__(self, "times", times)

    @classmethod
    def from_vertices(cls, points: Sequence, times: Optional[Sequence[float]] = None) -> "Polygonal":
        vertices = tuple(p if isinstance(p, SpherePoint) else SpherePoint.from_vector(p) for p in points)
        edges = []
        for i in range(len(vertices) - 1):
            try:
                edges.append(GeodesicSegment.between(vertices[i], vertices[i + 1]))
            except InscriptionError as e:
                raise InscriptionError(
                    f"Vertices {i} and {i + 1} are antipodal", {**e.details, "edge": i}
                )
        return cls(vertices, tuple(edges), None if times is None else np.asarray(times, dtype=float))

    @property
    def h(self) -> int:
        """Number of edges."""
        return len(self.edges)

    @property
    def edge_lengths(self) -> np.ndarray:
        return np.array([e.length for e in self.edges])

    @property
    def length(self) -> float:
        return float(np.sum(self.edge_lengths))

    @property
    def mesh(self) -> float:
        return float(np.max(self.edge_lengths))

    @property
    def points(self) -> np.ndarray:
        return np.array([v.coords for v in self.vertices])

    @property
    def is_closed(self) -> bool:
        return float(np.max(np.abs(self.vertices[0].coords - self.vertices[-1].coords))) <= TANGENT_TOL

    def turning_angles(self, closed: bool = False) -> List[float]:
        """
        Exterior angles at the interior vertices 1..h-1.

        With closed=True the angle where the polygonal returns to its start
        is appended; zero-length closing edges are skipped.
        """
        edges = [e for e in self.edges if e.length > 0.0] if closed else list(self.edges)
        angles = [
            angle_between(edges[i - 1].tangent_at(edges[i - 1].length), edges[i].direction)
            for i in range(1, len(edges))
        ]
        if closed:
            if not self.is_closed:
                raise ValidationError("Closed rotation needs a polygonal that returns to its start")
            angles.append(angle_between(edges[-1].tangent_at(edges[-1].length), edges[0].direction))
        return angles

    def reversed(self) -> "Polygonal":
        times = None if self.times is None else self.times[::-1].copy()
        return Polygonal.from_vertices(self.vertices[::-1], times)

    def rotated(self, rotation: Rotation3) -> "Polygonal":
        return Polygonal.from_vertices(rotation.apply(self.points), self.times)


@dataclass(frozen=True)
class PolygonalStats:
    mesh: float
    modulus: float
    turning_angles: Tuple[float, ...]
    intrinsic_rotation: float


# =============================================================================
# Inscription
# =============================================================================

def _check_times(c: ParamCurve, times: np.ndarray) -> np.ndarray:
    if times.ndim != 1 or times.size < 2:
        raise ValidationError("Inscription needs at least two times")
    if np.any(np.diff(times) <= 0.0):
        raise ValidationError("Inscription times must be strictly increasing")
    if times[0] < -TIME_TOL or times[-1] > c.domain + TIME_TOL:
        raise RangeError(
            f"Inscription times leave the domain [0, {c.domain}]",
            {"first": float(times[0]), "last": float(times[-1])},
        )
    return np.clip(times, 0.0, c.domain)


def inscribe_at_times(c: ParamCurve, times: Sequence[float]) -> Polygonal:
    """Polygonal with vertices c(t_i) joined by minimizing geodesics."""
    times = _check_times(c, np.asarray(times, dtype=float))
    return Polygonal.from_vertices(c.position(times), times)


def regular_times(c: ParamCurve, n: int) -> np.ndarray:
    """n + 1 equally spaced parameters covering the whole domain."""
    if n < 1:
        raise ValidationError("Need at least one edge")
    return np.linspace(0.0, c.domain, n + 1)


def _next_vertex_time(c: ParamCurve, t_i: float, ell: float, xtol: float) -> Optional[float]:
    """
    Smallest t > t_i with d(c(t_i), c(t)) = ell, or None before the domain end.

    Chords never exceed arcs, so the scan starts one edge length of arc
    ahead and walks forward in steps of ell/16 until the chord passes ell.
    """
    x_i = c.position(t_i)
    s_i = c.s_of_t(t_i)
    total = c.length

    def chord_gap(t: float) -> float:
        return angle_between(x_i, c.position(t)) - ell

    lo = t_i
    s = s_i + ell
    while True:
        s_guess = min(s, total)
        t_guess = float(c.approx_t_of_s(s_guess)) if s_guess < total else c.domain
        if t_guess <= lo:
            t_guess = min(lo + TIME_TOL, c.domain)
        gap = chord_gap(t_guess)
        if gap >= 0.0:
            if gap == 0.0:
                return t_guess
            root = brentq(chord_gap, lo, t_guess, xtol=xtol, rtol=4 * np.finfo(float).eps)
            logger.debug("Marching root t=%.17g (bracket [%.6g, %.6g])", root, lo, t_guess)
            return float(root)
        if s_guess >= total:
            return None
        lo = t_guess
        s += ell * SCAN_FRACTION


def _march(c: ParamCurve, ell: float, xtol: float, max_edges: Optional[int] = None) -> List[float]:
    times = [0.0]
    while max_edges is None or len(times) - 1 < max_edges:
        t_next = _next_vertex_time(c, times[-1], ell, xtol)
        if t_next is None:
            break
        if c.domain - t_next <= TIME_TOL:
            times.append(c.domain)
            return times
        times.append(t_next)
    return times


def _closing_gap(c: ParamCurve, ell: float, h: int, xtol: float) -> float:
    """Length of the closing edge minus ell after h - 1 full edges."""
    times = _march(c, ell, xtol, max_edges=h - 1)
    if len(times) < h or times[-1] >= c.domain:
        return -ell
    return angle_between(c.position(times[-1]), c.position(c.domain)) - ell


def inscribe_equilateral(c: ParamCurve, ell: float, exact_closing: bool = False,
                         xtol: Optional[float] = None) -> Polygonal:
    """
    Equilateral polygonal inscribed in c by marching from t_0 = 0.

    Every edge has geodesic length ell except the last, which satisfies
    0 < l_hat <= ell. With exact_closing the edge length is re-solved with
    the edge count fixed so that all edges are equal.
    """
    xtol = get_config().get_float("marching.xtol") if xtol is None else xtol
    total = c.length
    if not (0.0 < ell < min(np.pi / 2.0, total)):
        raise RangeError(
            f"Edge length must lie in (0, min(pi/2, L)), got {ell}", {"ell": ell, "curve_length": total}
        )
    times = _march(c, ell, xtol)
    if times[-1] < c.domain:
        remaining = total - c.s_of_t(times[-1])
        l_hat = angle_between(c.position(times[-1]), c.position(c.domain))
        if remaining > 2.0 * ell or l_hat <= TIME_TOL:
            raise MarchingError(
                f"Chord never reaches ell={ell} after t={times[-1]:.12g} on {c.descriptor}",
                {"t": times[-1], "remaining_arc": remaining, "closing_chord": l_hat, "edges": len(times) - 1},
            )
        times.append(c.domain)
    h = len(times) - 1
    logger.info("Marched %d edges of length %.6g along %s", h, ell, c.descriptor)

    if exact_closing and h > 1:
        last = angle_between(c.position(times[-2]), c.position(times[-1]))
        if abs(last - ell) > xtol:
            ell_exact = _solve_closing(c, ell, h, xtol)
            times = _march(c, ell_exact, xtol, max_edges=h - 1)
            times.append(c.domain)
            logger.info("Exact closing: h=%d, ell=%.17g", h, ell_exact)
    return inscribe_at_times(c, times)


def _solve_closing(c: ParamCurve, ell: float, h: int, xtol: float) -> float:
    hi = ell
    lo = ell * (h - 1) / h
    for _ in range(32):
        if _closing_gap(c, lo, h, xtol) > 0.0:
            break
        hi, lo = lo, lo * (1.0 - 1.0 / h)
    else:
        raise MarchingError(f"Could not bracket an exactly closing edge length for h={h}", {"ell": ell})
    return float(brentq(lambda x: _closing_gap(c, x, h, xtol), lo, hi, xtol=xtol))


# =============================================================================
# Mesh, modulus and rotations
# =============================================================================

def _geodesic_diameter(points: np.ndarray) -> float:
    chords = pdist(points)
    if chords.size == 0:
        return 0.0
    return float(2.0 * np.arcsin(min(np.max(chords) / 2.0, 1.0)))


def nested_grid_size(n: int) -> int:
    """Smallest 2^k + 1 that is at least n; grids of these sizes on one arc are nested."""
    return (1 << max(n - 2, 0).bit_length()) + 1


def modulus(c: ParamCurve, P: Polygonal, n_samples: Optional[int] = None) -> float:
    """
    Largest geodesic diameter of the arcs of c between consecutive vertices.

    Each arc is sampled on nested_grid_size(n_samples) equally spaced times,
    so the estimate never decreases as n_samples grows.
    """
    if P.times is None:
        raise ValidationError("Modulus needs a polygonal inscribed at known times")
    n_samples = n_samples or get_config().get_int("modulus.samples")
    if n_samples < 2:
        raise ValidationError("Modulus needs at least two samples per arc")
    n_grid = nested_grid_size(n_samples)
    best = 0.0
    for a, b in zip(P.times[:-1], P.times[1:]):
        best = max(best, _geodesic_diameter(c.position(np.linspace(a, b, n_grid))))
    return best


def intrinsic_rotation(P: Polygonal, closed: bool = False) -> float:
    """Sum of the turning angles (interior vertices only unless closed)."""
    if P.h < 2 and not closed:
        return 0.0
    return float(np.sum(P.turning_angles(closed=closed)))


def polygonal_stats(c: ParamCurve, P: Polygonal, n_samples: Optional[int] = None) -> PolygonalStats:
    angles = tuple(P.turning_angles())
    return PolygonalStats(
        mesh=P.mesh,
        modulus=modulus(c, P, n_samples),
        turning_angles=angles,
        intrinsic_rotation=float(np.sum(angles)),
    )


def euclidean_p_rotation(ell: float, thetas: Sequence[float], p: float) -> float:
    """Sum of (ell/2)^(1-p) theta tan^(p-1)(theta/2) over the vertices."""
    if ell <= 0.0:
        raise RangeError(f"Edge length must be positive, got {ell}")
    if p < 1.0:
        raise RangeError(f"Exponent p must be at least 1, got {p}")
    thetas = np.asarray(thetas, dtype=float)
    if np.any(thetas < 0.0):
        raise RangeError("Turning angles are nonnegative")
    if np.any(thetas >= np.pi):
        raise SingularAngleError("Turning angle pi makes the Euclidean p-rotation diverge",
                                 {"theta": float(np.max(thetas))})
    return float(np.sum((ell / 2.0) ** (1.0 - p) * thetas * np.tan(thetas / 2.0) ** (p - 1.0)))


# =============================================================================
# CSV export
# =============================================================================

def polygonal_rows(P: Polygonal) -> List[list]:
    angles = P.turning_angles() if P.h >= 2 else []
    rows = []
    for i, v in enumerate(P.vertices):
        x, y, z = v.coords
        t = None if P.times is None else float(P.times[i])
        edge = float(P.edges[i].length) if i < P.h else None
        theta = angles[i - 1] if 0 < i < P.h else None
        rows.append([i, t, float(x), float(y), float(z), edge, theta])
    return rows


def write_polygonal_csv(P: Polygonal, path: Union[str, Path]) -> Path:
    return write_csv(path, POLYGONAL_HEADER, polygonal_rows(P), meta={"h": P.h, "length": P.length})


def read_polygonal_csv(path: Union[str, Path]) -> Polygonal:
    _, header, rows = read_csv(path)
    if header != POLYGONAL_HEADER:
        raise ValidationError(f"Polygonal CSV needs header {','.join(POLYGONAL_HEADER)}")
    points = [[float(r[2]), float(r[3]), float(r[4])] for r in rows]
    times = [parse_float(r[1]) for r in rows]
    return Polygonal.from_vertices(points, None if any(t is None for t in times) else times)
