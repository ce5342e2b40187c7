#!/usr/bin/env python3
"""
Unit tests for sphere_pcurv/numerics.py - quadrature, differences, bisection
"""

import math
import sys

import numpy as np
import pytest

sys.path.insert(0, '.')
from sphere_pcurv.numerics import (
    adaptive_gauss_legendre,
    bisect_increasing,
    central_first,
    central_second,
    gauss_legendre,
    legendre_rule,
    panel_nodes,
)


class TestLegendreRule:
    """Tests for legendre_rule and panel_nodes."""

    def test_weights_sum_to_two(self):
        _, weights = legendre_rule(8)
        assert weights.sum() == pytest.approx(2.0, rel=1e-15)

    def test_cached_arrays_are_read_only(self):
        nodes, _ = legendre_rule(8)
        with pytest.raises(ValueError):
            nodes[0] = 0.0

    def test_panel_nodes_ordered(self):
        x, w = panel_nodes(0.0, 2.0, 4, 5)
        assert x.shape == (20,)
        assert np.all(np.diff(x) > 0.0)
        assert w.sum() == pytest.approx(2.0, rel=1e-14)


class TestGaussLegendre:
    """Tests for gauss_legendre and adaptive_gauss_legendre."""

    def test_polynomial_exact(self):
        # order 4 integrates degree 7 exactly
        value = gauss_legendre(lambda x: x ** 7 - 3 * x ** 2, 0.0, 1.0, panels=1, order=4)
        assert value == pytest.approx(1.0 / 8.0 - 1.0, rel=1e-14)

    def test_empty_interval(self):
        assert gauss_legendre(np.sin, 1.0, 1.0, panels=4) == 0.0

    def test_adaptive_smooth(self):
        result = adaptive_gauss_legendre(np.sin, 0.0, math.pi)
        assert result.value == pytest.approx(2.0, rel=1e-12)
        assert result.error <= 1e-9

    def test_adaptive_vanishing_integral_stops(self):
        result = adaptive_gauss_legendre(np.sin, 0.0, 2.0 * math.pi, panels=4, max_panels=1 << 20)
        assert abs(result.value) <= 1e-13
        assert result.panels == 8

    def test_adaptive_respects_max_panels(self):
        result = adaptive_gauss_legendre(lambda x: np.sqrt(np.abs(x - 0.3)), 0.0, 1.0,
                                         panels=2, order=2, rel_tol=1e-15, max_panels=16)
        assert result.panels == 16


class TestFiniteDifferences:
    """Tests for central_first and central_second."""

    def test_first_derivative(self):
        t = np.array([0.1, 0.7, 2.0])
        assert np.allclose(central_first(np.sin, t, 1e-3), np.cos(t), atol=1e-11)

    def test_second_derivative(self):
        t = np.array([0.1, 0.7, 2.0])
        assert np.allclose(central_second(np.exp, t, 1e-2), np.exp(t), rtol=1e-8)

    def test_vector_valued(self):
        f = lambda t: np.column_stack([np.cos(t), np.sin(t)])
        t = np.linspace(0.0, 1.0, 4)
        expected = np.column_stack([-np.sin(t), np.cos(t)])
        assert np.allclose(central_first(f, t, 1e-3), expected, atol=1e-11)


class TestBisectIncreasing:
    """Tests for bisect_increasing."""

    def test_solves_elementwise(self):
        targets = np.array([0.25, 1.0, 2.25])
        roots = bisect_increasing(lambda t: t * t, targets, np.zeros(3), np.full(3, 2.0), tol=1e-14)
        assert np.allclose(roots, [0.5, 1.0, 1.5], atol=1e-13)

    def test_brackets_not_modified(self):
        lo, hi = np.zeros(2), np.ones(2)
        bisect_increasing(lambda t: t, np.array([0.2, 0.4]), lo, hi)
        assert np.all(lo == 0.0) and np.all(hi == 1.0)
