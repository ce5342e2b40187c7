"""
Sphere p-curvature - Numerical Kernels

Composite Gauss-Legendre quadrature with panel doubling, central finite
differences with one Richardson level, and a vectorized bisection used to
invert monotone tables. All functions take vectorized callables:
f(t: ndarray of shape (n,)) -> ndarray of shape (n,) or (n, d).
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Tuple

import numpy as np

logger = logging.getLogger(__name__)

VectorFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class QuadratureResult:
    """Value of an integral with the panel-doubling error estimate."""
    value: float
    error: float
    panels: int


@lru_cache(maxsize=32)
def legendre_rule(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def panel_nodes(a: float, b: float, panels: int, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the composite rule on [a, b] (flattened, ordered)."""
    nodes, weights = legendre_rule(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    return x, w


def gauss_legendre(f: VectorFn, a: float, b: float, panels: int, order: int = 8) -> float:
    """Composite Gauss-Legendre quadrature of a scalar integrand."""
    if b <= a:
        return 0.0
    x, w = panel_nodes(a, b, panels, order)
    return float(np.dot(w, f(x)))


def adaptive_gauss_legendre(
    f: VectorFn,
    a: float,
    b: float,
    panels: int = 256,
    order: int = 8,
    rel_tol: float = 1e-10,
    max_panels: int = 65536,
    abs_tol: float = 1e-14,
) -> QuadratureResult:
    """
    Double the panel count until the relative change drops below rel_tol
    (or the absolute change below abs_tol, for integrals that vanish).

    The reported error is the last observed change, which bounds the change
    of one further doubling for the smooth integrands used here.
    """
    previous = gauss_legendre(f, a, b, panels, order)
    while True:
        doubled = 2 * panels
        current = gauss_legendre(f, a, b, doubled, order)
        change = abs(current - previous)
        scale = max(abs(current), np.finfo(float).tiny)
        if change <= max(rel_tol * scale, abs_tol):
            return QuadratureResult(value=current, error=change, panels=doubled)
        if doubled >= max_panels:
            logger.warning(
                "Quadrature did not reach rel_tol=%g with %d panels (change %.3e)",
                rel_tol, doubled, change,
            )
            return QuadratureResult(value=current, error=change, panels=doubled)
        logger.debug("Quadrature doubling %d -> %d panels, change %.3e", panels, doubled, change)
        panels, previous = doubled, current


def central_first(f: VectorFn, t: np.ndarray, h: float) -> np.ndarray:
    """First derivative by central differences with one Richardson level."""
    t = np.asarray(t, dtype=float)

    def d(step: float) -> np.ndarray:
        return (f(t + step) - f(t - step)) / (2.0 * step)

    return (4.0 * d(0.5 * h) - d(h)) / 3.0


def central_second(f: VectorFn, t: np.ndarray, h: float) -> np.ndarray:
    """Second derivative by central differences with one Richardson level."""
    t = np.asarray(t, dtype=float)
    center = f(t)

    def d2(step: float) -> np.ndarray:
        return (f(t + step) - 2.0 * center + f(t - step)) / (step * step)

    return (4.0 * d2(0.5 * h) - d2(h)) / 3.0


def bisect_increasing(
    g: VectorFn,
    targets: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    tol: float = 1e-12,
    max_iter: int = 200,
) -> np.ndarray:
    """
    Solve g(t) = target elementwise for nondecreasing g on [lo, hi].

    Each element is bracketed by its own [lo, hi]; iteration stops when
    every bracket is narrower than tol.
    """
    targets = np.asarray(targets, dtype=float)
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    for _ in range(max_iter):
        if np.all(hi - lo <= tol):
            break
        mid = 0.5 * (lo + hi)
        below = g(mid) < targets
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)
