"""
Sphere p-curvature - Conformal Chart

The chart f : R^2 -> S^2 minus the south pole,

    f(x, y) = (4x, 4y, 4 - x^2 - y^2) / (4 + x^2 + y^2)

is conformal with factor e^lambda = 4 / (4 + x^2 + y^2). Curves move
between the plane and the sphere through f; geodesic curvature transforms as

    k_sphere = e^(-lambda) (k_plane - d_u lambda)

with u = e3 x t the planar conormal. Also here: the elementary inequality
constant |a - b|^p >= a^p - C b a^(p-1).
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

from .config import get_config
from .curve_model import ParamCurve
from .errors import ChartDomainError, RangeError, ValidationError
from .export import read_csv
from .numerics import adaptive_gauss_legendre, central_first, central_second
from .sphere_geom import SpherePoint, as_vector

logger = logging.getLogger(__name__)

SOUTH_POLE = np.array([0.0, 0.0, -1.0])
SOUTH_POLE_MARGIN = 1e-9

PlaneFn = Callable[[np.ndarray], np.ndarray]


# =============================================================================
# The chart
# =============================================================================

class ConformalChart:
    """The fixed chart f, vectorized over arrays of planar points."""

    @staticmethod
    def forward(x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r2 = x * x + y * y
        d = 4.0 + r2
        return np.stack([4.0 * x / d, 4.0 * y / d, (4.0 - r2) / d], axis=-1)

    @staticmethod
    def inverse(points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        gap = np.linalg.norm(pts - SOUTH_POLE, axis=-1)
        if np.any(gap <= SOUTH_POLE_MARGIN):
            raise ChartDomainError("The south pole has no preimage in the plane", {"distance": float(np.min(gap))})
        scale = 2.0 / (1.0 + pts[..., 2])
        return np.stack([scale * pts[..., 0], scale * pts[..., 1]], axis=-1)

    @staticmethod
    def log_factor(x, y):
        """lambda = log(4 / (4 + x^2 + y^2))."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.log(4.0) - np.log(4.0 + x * x + y * y)

    @staticmethod
    def grad_log_factor(x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        d = 4.0 + x * x + y * y
        return np.stack([-2.0 * x / d, -2.0 * y / d], axis=-1)

    @staticmethod
    def _u_derivatives(x: np.ndarray, y: np.ndarray):
        d = 4.0 + x * x + y * y
        u = 1.0 / d
        u_x, u_y = -2.0 * x / d ** 2, -2.0 * y / d ** 2
        u_xx = -2.0 / d ** 2 + 8.0 * x * x / d ** 3
        u_xy = 8.0 * x * y / d ** 3
        u_yy = -2.0 / d ** 2 + 8.0 * y * y / d ** 3
        return u, u_x, u_y, u_xx, u_xy, u_yy

    @classmethod
    def differential(cls, x, y) -> np.ndarray:
        """Jacobian of f, shape (..., 3, 2)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        u, u_x, u_y, _, _, _ = cls._u_derivatives(x, y)
        rows = [
            [4.0 * u + 4.0 * x * u_x, 4.0 * x * u_y],
            [4.0 * y * u_x, 4.0 * u + 4.0 * y * u_y],
            [8.0 * u_x, 8.0 * u_y],
        ]
        return np.stack([np.stack(row, axis=-1) for row in rows], axis=-2)

    @classmethod
    def hessian(cls, x, y) -> np.ndarray:
        """Second derivatives of f as (..., 3, 3): columns xx, xy, yy."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        _, u_x, u_y, u_xx, u_xy, u_yy = cls._u_derivatives(x, y)
        rows = [
            [8.0 * u_x + 4.0 * x * u_xx, 4.0 * u_y + 4.0 * x * u_xy, 4.0 * x * u_yy],
            [4.0 * y * u_xx, 4.0 * u_x + 4.0 * y * u_xy, 8.0 * u_y + 4.0 * y * u_yy],
            [8.0 * u_xx, 8.0 * u_xy, 8.0 * u_yy],
        ]
        return np.stack([np.stack(row, axis=-1) for row in rows], axis=-2)


CHART = ConformalChart()


def plane_to_sphere(x: float, y: float) -> SpherePoint:
    return SpherePoint.from_vector(CHART.forward(x, y))


def sphere_to_plane(p) -> Tuple[float, float]:
    x, y = CHART.inverse(as_vector(p))
    return float(x), float(y)


def conformal_curvature(k_plane: float, point: Sequence[float], conormal: Sequence[float]) -> float:
    """
    Signed geodesic curvature on the sphere of the image of a planar curve.

    k_plane is the signed planar curvature measured against conormal; the
    result is measured against the image of that conormal.
    """
    conormal = np.asarray(conormal, dtype=float)
    if abs(float(np.linalg.norm(conormal)) - 1.0) > 1e-10:
        raise ValidationError("Conormal must be a unit vector")
    x, y = point
    du_lambda = float(np.dot(CHART.grad_log_factor(x, y), conormal))
    return float(np.exp(-CHART.log_factor(x, y)) * (k_plane - du_lambda))


def differential_scaling(x: float, y: float, directions: Sequence[Sequence[float]]) -> np.ndarray:
    """Lengths of df applied to each planar direction."""
    jac = CHART.differential(x, y)
    images = np.asarray(directions, dtype=float) @ jac.T
    return np.linalg.norm(images, axis=-1)


# =============================================================================
# Planar curves
# =============================================================================

@dataclass(frozen=True, eq=False)
class PlanarCurve:
    """Curve t -> (x, y) on [0, domain]; maps take (n,) to (n, 2)."""
    domain: float
    position_fn: PlaneFn
    velocity_fn: Optional[PlaneFn] = None
    acceleration_fn: Optional[PlaneFn] = None
    descriptor: str = "planar"

    def __post_init__(self):
        if not (self.domain > 0.0 and np.isfinite(self.domain)):
            raise ValidationError(f"Planar curve domain must be a positive length, got {self.domain}")

    @property
    def derivative_mode(self) -> str:
        if self.velocity_fn is not None and self.acceleration_fn is not None:
            return "analytic"
        return "numeric"

    def position(self, t) -> np.ndarray:
        return self.position_fn(np.atleast_1d(np.asarray(t, dtype=float)))

    def velocity(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.velocity_fn is not None:
            return self.velocity_fn(t)
        return central_first(self.position_fn, t, get_config().get_float("differentiation.h_fd"))

    def acceleration(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.acceleration_fn is not None:
            return self.acceleration_fn(t)
        return central_second(self.position_fn, t, get_config().get_float("differentiation.h_fd2"))

    def speed(self, t) -> np.ndarray:
        return np.linalg.norm(self.velocity(t), axis=-1)

    def length(self) -> float:
        return adaptive_gauss_legendre(self.speed, 0.0, self.domain).value


def planar_curvature(g: PlanarCurve, t) -> Tuple[np.ndarray, np.ndarray]:
    """Signed curvature (x'y'' - y'x'')/|v|^3 and the conormal e3 x t."""
    v = g.velocity(t)
    a = g.acceleration(t)
    sigma = np.linalg.norm(v, axis=-1)
    k = (v[:, 0] * a[:, 1] - v[:, 1] * a[:, 0]) / sigma ** 3
    conormal = np.column_stack([-v[:, 1], v[:, 0]]) / sigma[:, None]
    return k, conormal


def sphere_curvature_along(g: PlanarCurve, t) -> np.ndarray:
    """conformal_curvature evaluated along g, vectorized (signed)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    xy = g.position(t)
    k, conormal = planar_curvature(g, t)
    grad = CHART.grad_log_factor(xy[:, 0], xy[:, 1])
    du_lambda = np.einsum("ij,ij->i", grad, conormal)
    return np.exp(-CHART.log_factor(xy[:, 0], xy[:, 1])) * (k - du_lambda)


def make_planar_line(point: Sequence[float] = (0.0, 0.0), direction: Sequence[float] = (1.0, 0.0),
                     length: float = 1.0, start: float = 0.0) -> PlanarCurve:
    """Unit-speed segment point + (start + t) direction, t in [0, length]."""
    p = np.asarray(point, dtype=float)
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    return PlanarCurve(
        domain=length,
        position_fn=lambda t: p[None, :] + (start + t)[:, None] * d[None, :],
        velocity_fn=lambda t: np.tile(d, (t.size, 1)),
        acceleration_fn=lambda t: np.zeros((t.size, 2)),
        descriptor=f"line:point=({p[0]:g},{p[1]:g}),direction=({d[0]:g},{d[1]:g})",
    )


def make_planar_circle(radius: float, center: Sequence[float] = (0.0, 0.0), turns: float = 1.0) -> PlanarCurve:
    """Counterclockwise unit-speed circle."""
    if radius <= 0.0:
        raise ValidationError(f"Circle radius must be positive, got {radius}")
    cx, cy = center

    def position(t: np.ndarray) -> np.ndarray:
        w = t / radius
        return np.column_stack([cx + radius * np.cos(w), cy + radius * np.sin(w)])

    def velocity(t: np.ndarray) -> np.ndarray:
        w = t / radius
        return np.column_stack([-np.sin(w), np.cos(w)])

    def acceleration(t: np.ndarray) -> np.ndarray:
        w = t / radius
        return np.column_stack([-np.cos(w), -np.sin(w)]) / radius

    return PlanarCurve(
        domain=2.0 * np.pi * radius * turns,
        position_fn=position,
        velocity_fn=velocity,
        acceleration_fn=acceleration,
        descriptor=f"circle:r={radius!r},center=({cx!r},{cy!r})",
    )


def make_planar_spiral(a: float = 0.5, b: float = 0.05, span: float = 3.0) -> PlanarCurve:
    """Spiral r(w) = a + b w^3 for w in [0, span]."""
    if a <= 0.0:
        raise ValidationError("Spiral needs a positive starting radius")

    def position(w: np.ndarray) -> np.ndarray:
        r = a + b * w ** 3
        return np.column_stack([r * np.cos(w), r * np.sin(w)])

    def velocity(w: np.ndarray) -> np.ndarray:
        r, r1 = a + b * w ** 3, 3.0 * b * w ** 2
        return np.column_stack([r1 * np.cos(w) - r * np.sin(w), r1 * np.sin(w) + r * np.cos(w)])

    def acceleration(w: np.ndarray) -> np.ndarray:
        r, r1, r2 = a + b * w ** 3, 3.0 * b * w ** 2, 6.0 * b * w
        return np.column_stack([
            (r2 - r) * np.cos(w) - 2.0 * r1 * np.sin(w),
            (r2 - r) * np.sin(w) + 2.0 * r1 * np.cos(w),
        ])

    return PlanarCurve(
        domain=span,
        position_fn=position,
        velocity_fn=velocity,
        acceleration_fn=acceleration,
        descriptor=f"spiral:a={a!r},b={b!r}",
    )


def load_planar_curve(path: Union[str, Path]) -> PlanarCurve:
    """Load a CSV with header t,x,y (strictly increasing t)."""
    _, header, rows = read_csv(path)
    if header != ["t", "x", "y"]:
        raise ValidationError(f"Planar curve CSV needs header t,x,y, got {','.join(header)}")
    data = np.array([[float(v) for v in row] for row in rows], dtype=float)
    if data.ndim != 2 or data.shape[0] < 4 or np.any(np.diff(data[:, 0]) <= 0.0):
        raise ValidationError(f"Planar curve {path} needs at least 4 rows with increasing t")
    spline = CubicSpline(data[:, 0] - data[0, 0], data[:, 1:], axis=0)
    return PlanarCurve(
        domain=float(data[-1, 0] - data[0, 0]),
        position_fn=spline,
        velocity_fn=spline.derivative(1),
        acceleration_fn=spline.derivative(2),
        descriptor=f"csv:{Path(path).name}",
    )


# =============================================================================
# Pushforward and pullback
# =============================================================================

def pushforward_curve(g: PlanarCurve) -> ParamCurve:
    """c = f o g with chain-rule derivatives when g has analytic ones."""

    def position(t: np.ndarray) -> np.ndarray:
        xy = g.position(t)
        return CHART.forward(xy[:, 0], xy[:, 1])

    velocity = acceleration = None
    if g.derivative_mode == "analytic":
        def velocity(t: np.ndarray) -> np.ndarray:
            xy = g.position(t)
            jac = CHART.differential(xy[:, 0], xy[:, 1])
            return np.einsum("nij,nj->ni", jac, g.velocity(t))

        def acceleration(t: np.ndarray) -> np.ndarray:
            xy = g.position(t)
            v = g.velocity(t)
            jac = CHART.differential(xy[:, 0], xy[:, 1])
            hess = CHART.hessian(xy[:, 0], xy[:, 1])
            quad = np.column_stack([v[:, 0] ** 2, 2.0 * v[:, 0] * v[:, 1], v[:, 1] ** 2])
            return np.einsum("nij,nj->ni", jac, g.acceleration(t)) + np.einsum("nij,nj->ni", hess, quad)

    return ParamCurve(
        domain=g.domain,
        position_fn=position,
        velocity_fn=velocity,
        acceleration_fn=acceleration,
        descriptor=f"pushforward({g.descriptor})",
    )


def pullback_curve(c: ParamCurve) -> PlanarCurve:
    """g = f^-1 o c; numeric derivatives."""
    return PlanarCurve(
        domain=c.domain,
        position_fn=lambda t: CHART.inverse(c.position(t)),
        descriptor=f"pullback({c.descriptor})",
    )


def arc_element_integral(g: PlanarCurve, t: float) -> float:
    """Integral of e^(-lambda(g)) from 0 to t; the planar length when f o g is unit speed."""
    if t < 0.0 or t > g.domain:
        raise RangeError(f"Parameter {t} outside [0, {g.domain}]")

    def integrand(tau: np.ndarray) -> np.ndarray:
        xy = g.position(tau)
        return np.exp(-CHART.log_factor(xy[:, 0], xy[:, 1]))

    return adaptive_gauss_legendre(integrand, 0.0, t).value


def chart_curvature_integral(g: PlanarCurve, p: float) -> float:
    """
    Integral of |k_sphere|^p over f o g computed entirely in the plane:
    curvature from conformal_curvature, arc element e^lambda |g'| dt.
    """
    if p < 1.0:
        raise RangeError(f"Exponent p must be at least 1, got {p}")

    def integrand(t: np.ndarray) -> np.ndarray:
        xy = g.position(t)
        k = sphere_curvature_along(g, t)
        return np.abs(k) ** p * np.exp(CHART.log_factor(xy[:, 0], xy[:, 1])) * g.speed(t)

    cfg = get_config()
    return adaptive_gauss_legendre(
        integrand, 0.0, g.domain,
        panels=cfg.get_int("quadrature.panels"),
        order=cfg.get_int("quadrature.order"),
        rel_tol=cfg.get_float("quadrature.rel_tol"),
        max_panels=cfg.get_int("quadrature.max_panels"),
    ).value


# =============================================================================
# The inequality constant
# =============================================================================

def _pstima_objective(x: float, p: float) -> float:
    """(t^p - |t - 1|^p) / t^(p-1) written in x = 1/t."""
    return (1.0 - abs(1.0 - x) ** p) / x


def pstima_constant(p: float, grid: int = 4001) -> float:
    """
    Smallest C with |a - b|^p >= a^p - C b a^(p-1) for all a, b > 0.

    The ratio only depends on x = b/a; positive values need x < 2, and
    x -> 0 gives the limit p, which is included as a candidate.
    """
    if p <= 1.0:
        raise RangeError(f"Inequality constant needs p > 1, got {p}")
    xs = np.geomspace(1e-9, 2.0, grid)
    values = (1.0 - np.abs(1.0 - xs) ** p) / xs
    j = int(np.argmax(values))
    best = float(values[j])
    lo, hi = xs[max(j - 1, 0)], xs[min(j + 1, grid - 1)]
    if hi > lo:
        refined = minimize_scalar(lambda x: -_pstima_objective(x, p), bounds=(lo, hi),
                                  method="bounded", options={"xatol": 1e-14})
        best = max(best, -float(refined.fun))
    return max(best, float(p))


def pstima_asymptotic_ratio(p: float, t: float) -> float:
    """((t - 1)^p - t^p) / t^(p-1), evaluated without cancellation; tends to -p."""
    if t <= 1.0:
        raise RangeError("Asymptotic ratio needs t > 1")
    return float(t * np.expm1(p * np.log1p(-1.0 / t)))


def pstima_holds(a: float, b: float, p: float, constant: float) -> bool:
    return abs(a - b) ** p >= a ** p - constant * b * a ** (p - 1.0) - 1e-12 * max(a, b) ** p
