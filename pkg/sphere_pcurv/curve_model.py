"""
Sphere p-curvature - Curves on the Sphere

ParamCurve wraps vectorized position/derivative maps t -> R^3 on [0, T]
together with a precomputed arc-length table. The catalogue of test curves
(parallels, great circles, corner curves, sampled CSV curves) lives here,
as do the pointwise geodesic curvature |c'' + c| and the quadrature oracle
for the integral of |k|^p ds.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from .config import get_config
from .errors import (
    DegenerateParametrizationError,
    NonSmoothPointError,
    RangeError,
    ValidationError,
)
from .export import read_csv
from .numerics import (
    QuadratureResult,
    adaptive_gauss_legendre,
    bisect_increasing,
    central_first,
    central_second,
    legendre_rule,
    panel_nodes,
)
from .sphere_geom import GeodesicSegment, Rotation3, angle_between

logger = logging.getLogger(__name__)

VectorFn = Callable[[np.ndarray], np.ndarray]

CORNER_TOL = 1e-9
MIN_SPEED = 1e-10
SAMPLED_NORM_TOL = 1e-3


def _as_param(t) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(t, dtype=float)
    return np.atleast_1d(arr), arr.ndim == 0


@dataclass(frozen=True, eq=False)
class CurvatureSample:
    """Geodesic curvature magnitude at arc length s."""
    s: float
    k: float


@dataclass(frozen=True, eq=False)
class ParamCurve:
    """
    A curve on S^2 over the parameter domain [0, domain].

    position_fn, velocity_fn and acceleration_fn map arrays of shape (n,)
    to (n, 3). Without derivative maps the curve differentiates numerically.
    corners lists parameter values where the tangent jumps.
    """
    domain: float
    position_fn: VectorFn
    velocity_fn: Optional[VectorFn] = None
    acceleration_fn: Optional[VectorFn] = None
    corners: Tuple[float, ...] = ()
    descriptor: str = "curve"
    h_fd: float = field(default_factory=lambda: get_config().get_float("differentiation.h_fd"))
    h_fd2: float = field(default_factory=lambda: get_config().get_float("differentiation.h_fd2"))
    n_table: int = field(default_factory=lambda: get_config().get_int("arclength.n_table"))

    def __post_init__(self):
        if not (self.domain > 0.0 and np.isfinite(self.domain)):
            raise ValidationError(f"Curve domain must be a positive length, got {self.domain}")
        if self.n_table < 16:
            raise ValidationError("Arc-length table needs at least 16 samples")

    @property
    def derivative_mode(self) -> str:
        if self.velocity_fn is not None and self.acceleration_fn is not None:
            return "analytic"
        return "numeric"

    # -------------------------------------------------------------------------
    # Pointwise evaluation
    # -------------------------------------------------------------------------

    def position(self, t):
        arr, scalar = _as_param(t)
        out = self.position_fn(arr)
        return out[0] if scalar else out

    def velocity(self, t):
        arr, scalar = _as_param(t)
        if self.velocity_fn is not None:
            out = self.velocity_fn(arr)
        else:
            out = central_first(self.position_fn, arr, self.h_fd)
        return out[0] if scalar else out

    def acceleration(self, t):
        arr, scalar = _as_param(t)
        if self.acceleration_fn is not None:
            out = self.acceleration_fn(arr)
        else:
            out = central_second(self.position_fn, arr, self.h_fd2)
        return out[0] if scalar else out

    def speed(self, t):
        v = self.velocity(t)
        return np.linalg.norm(v, axis=-1)

    def curvature(self, t):
        """
        Geodesic curvature magnitude in any regular parametrization.

        With unit tangent T and speed sigma, the arc-length acceleration is
        (a - (a.T)T)/sigma^2; its tangential part is that plus the position.
        """
        arr, scalar = _as_param(t)
        x = self.position(arr)
        v = self.velocity(arr)
        a = self.acceleration(arr)
        sigma = np.linalg.norm(v, axis=-1)
        unit = v / sigma[:, None]
        along = np.einsum("ij,ij->i", a, unit)
        c_ss = (a - along[:, None] * unit) / (sigma * sigma)[:, None]
        k = np.linalg.norm(c_ss + x, axis=-1)
        return float(k[0]) if scalar else k

    # -------------------------------------------------------------------------
    # Arc-length table
    # -------------------------------------------------------------------------

    @cached_property
    def arclength_table(self) -> Tuple[np.ndarray, np.ndarray]:
        """Samples (t_j, s_j), strictly increasing in both coordinates."""
        t_table = np.linspace(0.0, self.domain, self.n_table)
        order = get_config().get_int("quadrature.order")
        nodes, weights = panel_nodes(0.0, self.domain, self.n_table - 1, order)
        speeds = self.speed(nodes)
        if not np.all(np.isfinite(speeds)) or np.min(speeds) < MIN_SPEED:
            raise DegenerateParametrizationError(
                f"Vanishing speed detected on {self.descriptor}",
                {"min_speed": float(np.min(speeds))},
            )
        pieces = (weights * speeds).reshape(self.n_table - 1, order).sum(axis=1)
        s_table = np.concatenate([[0.0], np.cumsum(pieces)])
        if np.any(np.diff(s_table) <= 0.0):
            raise DegenerateParametrizationError(f"Arc-length table of {self.descriptor} is not increasing")
        return t_table, s_table

    @property
    def length(self) -> float:
        return float(self.arclength_table[1][-1])

    @cached_property
    def _s_to_t_guess(self) -> PchipInterpolator:
        t_table, s_table = self.arclength_table
        return PchipInterpolator(s_table, t_table, extrapolate=True)

    def s_of_t(self, t):
        """Arc length from 0 to t: table value plus one Gauss-Legendre panel."""
        arr, scalar = _as_param(t)
        t_table, s_table = self.arclength_table
        arr = np.clip(arr, 0.0, self.domain)
        j = np.clip(np.searchsorted(t_table, arr, side="right") - 1, 0, self.n_table - 2)
        nodes, weights = legendre_rule(get_config().get_int("quadrature.order"))
        left = t_table[j]
        half = 0.5 * (arr - left)
        x = (left + half)[:, None] + half[:, None] * nodes[None, :]
        speeds = self.speed(x.ravel()).reshape(x.shape)
        out = s_table[j] + half * (speeds @ weights)
        return float(out[0]) if scalar else out

    def t_of_s(self, s, tol: Optional[float] = None):
        """Parameter at arc length s, by bisection inside the table bracket."""
        arr, scalar = _as_param(s)
        tol = get_config().get_float("arclength.tol") if tol is None else tol
        t_table, s_table = self.arclength_table
        arr = np.clip(arr, 0.0, s_table[-1])
        j = np.clip(np.searchsorted(s_table, arr, side="right") - 1, 0, self.n_table - 2)
        out = bisect_increasing(self.s_of_t, arr, t_table[j], t_table[j + 1], tol=tol)
        return float(out[0]) if scalar else out

    def approx_t_of_s(self, s):
        """Monotone cubic interpolation of the table; cheap, for bracketing."""
        return np.clip(self._s_to_t_guess(s), 0.0, self.domain)

    # -------------------------------------------------------------------------
    # Transformations
    # -------------------------------------------------------------------------

    def rotated(self, rotation: Rotation3) -> "ParamCurve":
        def wrap(fn: Optional[VectorFn]) -> Optional[VectorFn]:
            if fn is None:
                return None
            return lambda t: rotation.apply(fn(t))

        return ParamCurve(
            domain=self.domain,
            position_fn=wrap(self.position_fn),
            velocity_fn=wrap(self.velocity_fn),
            acceleration_fn=wrap(self.acceleration_fn),
            corners=self.corners,
            descriptor=f"rotated {self.descriptor}",
            h_fd=self.h_fd,
            h_fd2=self.h_fd2,
            n_table=self.n_table,
        )

    def interior_corners(self, a: float = 0.0, b: Optional[float] = None) -> List[float]:
        b = self.domain if b is None else b
        return [t for t in self.corners if a + CORNER_TOL < t < b - CORNER_TOL]


# =============================================================================
# Test-curve catalogue
# =============================================================================

def _check_colatitude(phi: float) -> None:
    if not (0.0 < phi < np.pi) or min(phi, np.pi - phi) < 1e-12:
        raise ValidationError(f"Degenerate colatitude {phi}", {"phi": phi})


def make_parallel(phi: float, turns: float = 1.0, descriptor: Optional[str] = None) -> ParamCurve:
    """Circle of colatitude phi, arc-length parametrized, curvature cot(phi)."""
    _check_colatitude(phi)
    if turns <= 0.0:
        raise ValidationError("A parallel needs a positive number of turns")
    r, z = np.sin(phi), np.cos(phi)

    def position(s: np.ndarray) -> np.ndarray:
        w = s / r
        return np.column_stack([r * np.cos(w), r * np.sin(w), np.full_like(w, z)])

    def velocity(s: np.ndarray) -> np.ndarray:
        w = s / r
        return np.column_stack([-np.sin(w), np.cos(w), np.zeros_like(w)])

    def acceleration(s: np.ndarray) -> np.ndarray:
        w = s / r
        return np.column_stack([-np.cos(w) / r, -np.sin(w) / r, np.zeros_like(w)])

    return ParamCurve(
        domain=2.0 * np.pi * r * turns,
        position_fn=position,
        velocity_fn=velocity,
        acceleration_fn=acceleration,
        descriptor=descriptor or f"parallel:phi={phi!r},turns={turns!r}",
    )


def make_great_circle(turns: float = 1.0) -> ParamCurve:
    return make_parallel(np.pi / 2.0, turns, descriptor=f"great-circle:turns={turns!r}")


def make_parallel_by_longitude(phi: float, turns: float = 1.0) -> ParamCurve:
    """The same parallel parametrized by longitude (speed sin(phi))."""
    _check_colatitude(phi)
    r, z = np.sin(phi), np.cos(phi)

    def position(w: np.ndarray) -> np.ndarray:
        return np.column_stack([r * np.cos(w), r * np.sin(w), np.full_like(w, z)])

    def velocity(w: np.ndarray) -> np.ndarray:
        return np.column_stack([-r * np.sin(w), r * np.cos(w), np.zeros_like(w)])

    def acceleration(w: np.ndarray) -> np.ndarray:
        return np.column_stack([-r * np.cos(w), -r * np.sin(w), np.zeros_like(w)])

    return ParamCurve(
        domain=2.0 * np.pi * turns,
        position_fn=position,
        velocity_fn=velocity,
        acceleration_fn=acceleration,
        descriptor=f"parallel-longitude:phi={phi!r},turns={turns!r}",
    )


def make_doubled_great_circle() -> ParamCurve:
    """Equator traversed once at speed 2 over [0, pi]."""

    def position(t: np.ndarray) -> np.ndarray:
        return np.column_stack([np.cos(2 * t), np.sin(2 * t), np.zeros_like(t)])

    def velocity(t: np.ndarray) -> np.ndarray:
        return np.column_stack([-2 * np.sin(2 * t), 2 * np.cos(2 * t), np.zeros_like(t)])

    def acceleration(t: np.ndarray) -> np.ndarray:
        return np.column_stack([-4 * np.cos(2 * t), -4 * np.sin(2 * t), np.zeros_like(t)])

    return ParamCurve(
        domain=np.pi,
        position_fn=position,
        velocity_fn=velocity,
        acceleration_fn=acceleration,
        descriptor="great-circle-doubled",
    )


@dataclass(frozen=True, eq=False)
class CornerCurve:
    """Two geodesic arms meeting at the north pole with exterior angle theta."""
    incoming: GeodesicSegment
    outgoing: GeodesicSegment
    corner_angle: float


NORTH_POLE = np.array([0.0, 0.0, 1.0])


def corner_geometry(theta: float, arm_length: float) -> CornerCurve:
    if not (0.0 < theta < np.pi):
        raise ValidationError(f"Corner angle must lie in (0, pi), got {theta}")
    if not (0.0 < arm_length < np.pi / 2.0):
        raise ValidationError(
            f"Corner arms must be shorter than pi/2, got {arm_length}", {"arm_length": arm_length}
        )
    t_in = np.array([1.0, 0.0, 0.0])
    t_out = np.array([np.cos(theta), np.sin(theta), 0.0])
    start = np.cos(arm_length) * NORTH_POLE - np.sin(arm_length) * t_in
    incoming = GeodesicSegment.between(start, NORTH_POLE)
    outgoing = GeodesicSegment.from_direction(NORTH_POLE, t_out, arm_length)
    return CornerCurve(incoming=incoming, outgoing=outgoing, corner_angle=theta)


def make_corner_curve(theta: float, arm_length: float = 0.5) -> ParamCurve:
    """Unit-speed curve made of two geodesic arms with a corner at t = arm_length."""
    geometry = corner_geometry(theta, arm_length)
    a = arm_length
    t_in = np.array([1.0, 0.0, 0.0])
    t_out = geometry.outgoing.direction

    def position(t: np.ndarray) -> np.ndarray:
        before = t < a
        u = np.where(before, a - t, t - a)
        direction = np.where(before[:, None], -t_in[None, :], t_out[None, :])
        return np.cos(u)[:, None] * NORTH_POLE + np.sin(u)[:, None] * direction

    def velocity(t: np.ndarray) -> np.ndarray:
        before = t < a
        u = np.where(before, a - t, t - a)
        sign = np.where(before, -1.0, 1.0)
        direction = np.where(before[:, None], -t_in[None, :], t_out[None, :])
        return sign[:, None] * (
            -np.sin(u)[:, None] * NORTH_POLE + np.cos(u)[:, None] * direction
        )

    return ParamCurve(
        domain=2.0 * a,
        position_fn=position,
        velocity_fn=velocity,
        acceleration_fn=lambda t: -position(t),
        corners=(a,),
        descriptor=f"corner:theta={theta!r},arm={arm_length!r}",
    )


def make_sampled_curve(times: Sequence[float], points: np.ndarray, descriptor: str = "sampled") -> ParamCurve:
    """Numeric-mode curve through sampled unit points (cubic spline, renormalized)."""
    times = np.asarray(times, dtype=float)
    points = np.asarray(points, dtype=float)
    if times.ndim != 1 or points.shape != (times.size, 3):
        raise ValidationError("Sampled curve needs times (n,) and points (n, 3)")
    if times.size < 4:
        raise ValidationError("Sampled curve needs at least 4 samples")
    if np.any(np.diff(times) <= 0.0):
        raise ValidationError("Sample times must be strictly increasing")
    norms = np.linalg.norm(points, axis=1)
    if np.any(np.abs(norms - 1.0) > SAMPLED_NORM_TOL):
        bad = int(np.argmax(np.abs(norms - 1.0)))
        raise ValidationError(
            f"Sample {bad} is off the sphere (norm {norms[bad]:.6g})", {"row": bad}
        )
    spline = CubicSpline(times - times[0], points / norms[:, None], axis=0, extrapolate=True)

    def position(t: np.ndarray) -> np.ndarray:
        x = spline(t)
        return x / np.linalg.norm(x, axis=1)[:, None]

    return ParamCurve(
        domain=float(times[-1] - times[0]),
        position_fn=position,
        descriptor=descriptor,
    )


def load_sampled_curve(path: Union[str, Path]) -> ParamCurve:
    """Load a CSV with header t,x,y,z (strictly increasing t)."""
    _, header, rows = read_csv(path)
    if header != ["t", "x", "y", "z"]:
        raise ValidationError(f"Sampled curve CSV needs header t,x,y,z, got {','.join(header)}")
    try:
        data = np.array([[float(v) for v in row] for row in rows], dtype=float)
    except ValueError as e:
        raise ValidationError(f"Non-numeric sample in {path}: {e}")
    if data.ndim != 2 or data.shape[1] != 4:
        raise ValidationError(f"Malformed sampled curve file {path}")
    return make_sampled_curve(data[:, 0], data[:, 1:], descriptor=f"csv:{Path(path).name}")


# =============================================================================
# Reparametrization, curvature and the quadrature oracle
# =============================================================================

def arclength_reparam(c: ParamCurve, tol: float = 1e-8) -> ParamCurve:
    """Unit-speed view of c over [0, length(c)], derivatives by chain rule."""
    t_table, s_table = c.arclength_table

    def source_t(s: np.ndarray) -> np.ndarray:
        return c.t_of_s(s)

    def position(s: np.ndarray) -> np.ndarray:
        return c.position(source_t(s))

    def velocity(s: np.ndarray) -> np.ndarray:
        v = c.velocity(source_t(s))
        return v / np.linalg.norm(v, axis=1)[:, None]

    def acceleration(s: np.ndarray) -> np.ndarray:
        t = source_t(s)
        v = c.velocity(t)
        a = c.acceleration(t)
        sigma = np.linalg.norm(v, axis=1)
        unit = v / sigma[:, None]
        along = np.einsum("ij,ij->i", a, unit)
        return (a - along[:, None] * unit) / (sigma * sigma)[:, None]

    corners = tuple(float(c.s_of_t(t)) for t in c.corners)
    reparam = ParamCurve(
        domain=float(s_table[-1]),
        position_fn=position,
        velocity_fn=velocity,
        acceleration_fn=acceleration,
        corners=corners,
        descriptor=f"arclength({c.descriptor})",
        h_fd=c.h_fd,
        h_fd2=c.h_fd2,
        n_table=c.n_table,
    )
    speed_error = float(np.max(np.abs(reparam.speed(reparam.arclength_table[0]) - 1.0)))
    length_error = abs(reparam.length - c.length)
    if speed_error > tol or length_error > tol:
        raise DegenerateParametrizationError(
            f"Reparametrization of {c.descriptor} is not unit speed within {tol}",
            {"speed_error": speed_error, "length_error": length_error},
        )
    return reparam


def geodesic_curvature_at(c: ParamCurve, s: float) -> float:
    """|k_{S^2}| at parameter s; raises at corners."""
    if s < 0.0 or s > c.domain:
        raise RangeError(f"Parameter {s} outside [0, {c.domain}]")
    for corner in c.corners:
        if abs(s - corner) <= CORNER_TOL:
            raise NonSmoothPointError(f"Curvature undefined at corner t={corner}", {"corner": corner})
    return float(c.curvature(s))


def sample_curvature(c: ParamCurve, params: Sequence[float]) -> List[CurvatureSample]:
    params = np.asarray(params, dtype=float)
    ks = c.curvature(params)
    s_values = c.s_of_t(params)
    return [CurvatureSample(s=float(s), k=float(k)) for s, k in zip(s_values, ks)]


def _kp_integrand(c: ParamCurve, p: float) -> Callable[[np.ndarray], np.ndarray]:
    def integrand(t: np.ndarray) -> np.ndarray:
        return np.abs(c.curvature(t)) ** p * c.speed(t)
    return integrand


def integral_kp_between(c: ParamCurve, p: float, a: float, b: float,
                        n_quad: Optional[int] = None) -> QuadratureResult:
    """Adaptive quadrature of |k|^p ds over the parameter interval [a, b]."""
    if p < 1.0:
        raise RangeError(f"Exponent p must be at least 1, got {p}")
    inside = c.interior_corners(a, b)
    if inside:
        raise NonSmoothPointError(
            f"Corner inside integration domain of {c.descriptor}", {"corners": inside}
        )
    cfg = get_config()
    return adaptive_gauss_legendre(
        _kp_integrand(c, p),
        a,
        b,
        panels=n_quad or cfg.get_int("quadrature.panels"),
        order=cfg.get_int("quadrature.order"),
        rel_tol=cfg.get_float("quadrature.rel_tol"),
        max_panels=cfg.get_int("quadrature.max_panels"),
    )


def integral_kp_estimate(c: ParamCurve, p: float, n_quad: Optional[int] = None) -> QuadratureResult:
    return integral_kp_between(c, p, 0.0, c.domain, n_quad)


def integral_kp(c: ParamCurve, p: float, n_quad: Optional[int] = None) -> float:
    """Integral of |k_{S^2}|^p ds over the whole curve."""
    result = integral_kp_estimate(c, p, n_quad)
    logger.debug("integral_kp(%s, p=%g) = %.17g (+/- %.3e, %d panels)",
                 c.descriptor, p, result.value, result.error, result.panels)
    return result.value


def corner_turning_angles(c: ParamCurve, eps: float = 1e-9) -> List[float]:
    """Angle between one-sided unit tangents at each interior corner."""
    angles = []
    for t in c.interior_corners():
        before = c.velocity(t - eps)
        after = c.velocity(t + eps)
        angles.append(angle_between(before, after))
    return angles


def total_curvature(c: ParamCurve) -> float:
    """Integral of |k| over the smooth pieces plus the corner turning angles."""
    cuts = [0.0] + c.interior_corners() + [c.domain]
    smooth = sum(integral_kp_between(c, 1.0, a, b).value for a, b in zip(cuts[:-1], cuts[1:]))
    return smooth + sum(corner_turning_angles(c))


def holder_check(c: ParamCurve, p: float, q: float, interval: Tuple[float, float]) -> Tuple[float, float]:
    """
    Return ((avg_J |k|^q)^(p/q), avg_J |k|^p) over the parameter interval J.

    For 1 <= q <= p the first never exceeds the second (Jensen).
    """
    if not (1.0 <= q <= p):
        raise RangeError(f"Need 1 <= q <= p, got q={q}, p={p}")
    a, b = interval
    span = c.s_of_t(b) - c.s_of_t(a)
    if span <= 0.0:
        raise RangeError("Holder check needs a nondegenerate interval")
    avg_q = integral_kp_between(c, q, a, b).value / span
    avg_p = integral_kp_between(c, p, a, b).value / span
    return avg_q ** (p / q), avg_p
