#!/usr/bin/env python3
"""
Unit tests for sphere_pcurv/bend_construction.py - bends and the glued curve

Tests for:
- BendArc geometry and reversal
- canonical_bend: matching of trim points and tangents
- build_gamma: C^1 gluing, piece and junction counts, right turns
- fp_closed_form: limits, Euclidean asymptotics, singularity
- p_rotation against the closed form and brute-force quadrature
- Glued-curve CSV export
"""

import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, '.')
from sphere_pcurv.bend_construction import (
    GAMMA_HEADER,
    BendArc,
    brute_force_kp,
    build_gamma,
    canonical_bend,
    canonical_tangents,
    corner_polygonal,
    euclidean_fillet_value,
    fp_closed_form,
    length_ratio,
    p_rotation,
    p_rotation_of,
    vertex_bend_specs,
    vertex_frame,
    write_gamma_csv,
)
from sphere_pcurv.config import reset_config
from sphere_pcurv.curve_model import make_great_circle, make_parallel
from sphere_pcurv.errors import RangeError, SingularAngleError, ValidationError
from sphere_pcurv.polygonal import (
    Polygonal,
    euclidean_p_rotation,
    inscribe_at_times,
    inscribe_equilateral,
    regular_times,
)
from sphere_pcurv.sphere_geom import angle_between, random_rotation

ELLS = (0.5, 0.1, 0.02)
THETAS = (0.1, 0.5, 1.0, 2.0)
PS = (1.0, 1.5, 2.0, 3.0)


@pytest.fixture(autouse=True)
def clean_config_env(monkeypatch):
    for key in list(os.environ):
        if key.startswith("SPHERE_PCURV_"):
            monkeypatch.delenv(key, raising=False)
    reset_config()
    yield
    reset_config()


def _rel(a, b):
    return abs(a - b) / max(abs(b), np.finfo(float).tiny)


# =============================================================================
# Bend arcs
# =============================================================================

class TestCanonicalBend:
    """Tests for canonical_bend."""

    def test_arc_points_are_unit_and_at_colatitude(self):
        bend = canonical_bend(0.25, 1.0)
        arc = bend.arc
        s = np.linspace(0.0, arc.length, 50)
        pts = arc.point_at(s)
        assert np.max(np.abs(np.linalg.norm(pts, axis=1) - 1.0)) <= 1e-12
        angles = np.array([angle_between(arc.axis, x) for x in pts])
        assert np.max(np.abs(angles - arc.colatitude)) <= 1e-12

    def test_length_is_extent_times_radius(self):
        arc = canonical_bend(0.1, 0.5).arc
        assert arc.length == pytest.approx(arc.extent * math.sin(arc.colatitude), rel=1e-15)

    def test_matches_trim_points_and_tangents(self):
        for delta in (0.01, 0.25, 0.7):
            for theta in THETAS:
                bend = canonical_bend(delta, theta)
                arc = bend.arc
                assert np.allclose(arc.point_at(0.0), bend.trim_in, atol=1e-10)
                assert np.allclose(arc.point_at(arc.length), bend.trim_out, atol=1e-10)
                assert np.allclose(arc.tangent_at(0.0), bend.tangent_in, atol=1e-10)
                assert np.allclose(arc.tangent_at(arc.length), bend.tangent_out, atol=1e-10)

    def test_trim_points_at_half_length(self):
        bend = canonical_bend(0.3, 1.2)
        pole = np.array([0.0, 0.0, 1.0])
        assert angle_between(pole, bend.trim_in) == pytest.approx(0.3, abs=1e-12)
        assert angle_between(pole, bend.trim_out) == pytest.approx(0.3, abs=1e-12)

    def test_canonical_tangents_turn_by_theta(self):
        t_in, t_out = canonical_tangents(0.8)
        assert angle_between(t_in, t_out) == pytest.approx(0.8, abs=1e-14)
        assert np.cross(t_in, t_out)[2] > 0.0

    def test_straight_vertex_has_no_arc(self):
        assert canonical_bend(0.2, 0.0).arc is None

    def test_near_straight_angle_is_singular(self):
        with pytest.raises(SingularAngleError):
            canonical_bend(0.2, math.pi - 1e-7)

    def test_half_length_range(self):
        with pytest.raises(RangeError):
            canonical_bend(math.pi / 2, 1.0)

    def test_curvature_is_cot_colatitude(self):
        arc = canonical_bend(0.2, 1.0).arc
        s = np.linspace(0.0, arc.length, 7)
        k = np.linalg.norm(arc.second_derivative_at(s) + arc.point_at(s), axis=1)
        assert np.allclose(k, abs(1.0 / math.tan(arc.colatitude)), rtol=1e-12)


class TestBendArc:
    """Tests for BendArc."""

    def test_reversed_traverses_backwards(self):
        arc = canonical_bend(0.2, 1.0).arc
        back = arc.reversed()
        s = np.linspace(0.0, arc.length, 9)
        assert np.allclose(back.point_at(s), arc.point_at(arc.length - s), atol=1e-14)
        assert np.allclose(back.tangent_at(s), -arc.tangent_at(arc.length - s), atol=1e-14)
        assert back.curvature == pytest.approx(arc.curvature, rel=1e-14)

    def test_rotated_keeps_length(self):
        arc = canonical_bend(0.2, 1.0).arc
        moved = arc.rotated(random_rotation(1))
        assert moved.length == arc.length

    def test_rejects_decreasing_angles(self):
        with pytest.raises(ValidationError):
            BendArc(np.array([0, 0, 1.0]), np.array([1.0, 0, 0]), 0.5, 1.0, 0.5)


# =============================================================================
# Glued curve
# =============================================================================

class TestBuildGamma:
    """Tests for build_gamma."""

    def test_piece_and_junction_counts(self):
        for ell in ELLS:
            for theta in THETAS:
                gamma = build_gamma(corner_polygonal(ell, theta))
                assert len(gamma.pieces) == 3
                assert gamma.junction_count == 2

    def test_tangent_mismatch_on_grid(self):
        worst = max(
            build_gamma(corner_polygonal(ell, theta)).max_junction_mismatch()
            for ell in ELLS for theta in THETAS
        )
        assert worst <= 1e-8

    def test_inscribed_polygonal_counts(self):
        c = make_parallel(1.0)
        P = inscribe_at_times(c, regular_times(c, 12))
        gamma = build_gamma(P)
        assert len(gamma.pieces) == 2 * P.h - 1
        assert gamma.junction_count == 2 * P.h - 2
        assert len(gamma.bends) == P.h - 1
        assert gamma.max_junction_gap() <= 1e-10

    def test_right_turn_corner(self):
        for theta in THETAS:
            left = corner_polygonal(0.1, theta)
            right = corner_polygonal(0.1, theta, left=False)
            gamma = build_gamma(right)
            assert gamma.max_junction_mismatch() <= 1e-8
            assert vertex_bend_specs(right)[0].right_turn
            assert p_rotation(right, 2.0) == pytest.approx(p_rotation(left, 2.0), rel=1e-12)

    def test_southern_parallel_mirrors_northern(self):
        north = make_parallel(1.0)
        south = make_parallel(math.pi - 1.0)
        P = inscribe_at_times(north, regular_times(north, 10))
        Q = inscribe_at_times(south, regular_times(south, 10))
        assert p_rotation(Q, 2.0) == pytest.approx(p_rotation(P, 2.0), rel=1e-12)

    def test_rotated_polygonal(self):
        P = corner_polygonal(0.1, 1.0).rotated(random_rotation(9))
        assert build_gamma(P).max_junction_mismatch() <= 1e-8

    def test_great_circle_has_no_bends(self):
        c = make_great_circle()
        P = inscribe_at_times(c, np.linspace(0.0, 3.0, 7))
        gamma = build_gamma(P)
        assert gamma.bends == []
        assert p_rotation(P, 2.0) == 0.0

    def test_zero_length_edge_rejected(self):
        P = Polygonal.from_vertices([[1, 0, 0], [1, 0, 0], [0, 1, 0]])
        with pytest.raises(ValidationError):
            build_gamma(P)

    def test_sample_curvature_profile(self):
        gamma = build_gamma(corner_polygonal(0.2, 1.0))
        s, pts, k = gamma.sample(1000)
        assert np.all(np.diff(s) >= 0.0)
        assert s[-1] == pytest.approx(gamma.length, rel=1e-12)
        assert np.max(np.abs(np.linalg.norm(pts, axis=1) - 1.0)) <= 1e-12
        assert np.max(k) == pytest.approx(gamma.bends[0].curvature, rel=1e-10)

    def test_length_ratio_positive(self):
        ratio = length_ratio(corner_polygonal(0.2, 1.0))
        assert 0.0 < ratio <= 1.0 + 1e-8

    def test_vertex_frames_orthonormal_at_fine_scale(self):
        c = make_parallel(math.pi / 3.0)
        for P in (corner_polygonal(1e-6, 1.0), corner_polygonal(1e-5, 1e-4, left=False),
                  inscribe_equilateral(c, 0.0125, exact_closing=True)):
            for i, spec in enumerate(vertex_bend_specs(P), start=1):
                m = spec.local_frame.matrix
                assert np.max(np.abs(m.T @ m - np.eye(3))) <= 1e-14
                assert np.allclose(m[:, 2], P.vertices[i].coords, atol=1e-15)

    def test_vertex_frame_maps_canonical_tangents(self):
        theta = 0.8
        frame = random_rotation(5)
        t_in, t_out = canonical_tangents(theta)
        world_in, world_out = frame.apply(t_in), frame.apply(t_out)
        for a, b, right in ((world_in, world_out, False), (-world_out, -world_in, True)):
            local, right_turn = vertex_frame(frame.apply(np.array([0.0, 0.0, 1.0])), a, b)
            assert right_turn is right
            assert np.allclose(local.matrix, frame.matrix, atol=1e-14)

    def test_fine_parallel_glues(self):
        c = make_parallel(math.pi / 3.0)
        for ell in (0.025, 0.0125):
            gamma = build_gamma(inscribe_equilateral(c, ell, exact_closing=True))
            assert gamma.max_junction_mismatch() <= 1e-8


# =============================================================================
# p-rotation
# =============================================================================

class TestFpClosedForm:
    """Tests for fp_closed_form."""

    def test_p1_small_edge_limit(self):
        for theta in (0.1, 1.0, 2.0):
            assert abs(fp_closed_form(1e-6, theta, 1.0) - theta) <= 1e-6 * theta

    def test_euclidean_asymptotics(self):
        for p in (1.5, 2.0, 3.0):
            ratio = fp_closed_form(1e-2, 1e-2, p) / euclidean_fillet_value(1e-2, 1e-2, p)
            assert 0.95 <= ratio <= 1.05

    def test_p2_scaling(self):
        ratio = fp_closed_form(1e-2, 1e-2, 2.0) / (1e-2 ** 2 / 1e-2)
        assert 0.95 <= ratio <= 1.05

    def test_diverges_near_straight_angle(self):
        for p in (2.0, 3.0):
            assert fp_closed_form(0.1, math.pi - 1e-6, p) > 1e6

    def test_increases_towards_straight_angle(self):
        values = [fp_closed_form(0.1, math.pi - 10.0 ** -k, 1.5) for k in range(1, 7)]
        assert all(b > a for a, b in zip(values[:-1], values[1:]))

    def test_zero_angle(self):
        assert fp_closed_form(0.1, 0.0, 2.0) == 0.0

    def test_straight_angle_rejected(self):
        with pytest.raises(SingularAngleError):
            fp_closed_form(0.1, math.pi, 2.0)

    def test_p_below_one_rejected(self):
        with pytest.raises(RangeError):
            fp_closed_form(0.1, 1.0, 0.9)

    def test_euclidean_fillet_value(self):
        assert euclidean_fillet_value(0.3, 0.7, 2.5) == euclidean_p_rotation(0.3, [0.7], 2.5)


class TestPRotation:
    """Tests for p_rotation against the closed form and brute force."""

    def test_exact_matches_closed_form_on_grid(self):
        for ell in ELLS:
            for theta in THETAS:
                gamma = build_gamma(corner_polygonal(ell, theta))
                for p in PS:
                    assert _rel(p_rotation_of(gamma, p), fp_closed_form(ell, theta, p)) <= 1e-12

    def test_brute_force_matches_exact_on_grid(self):
        for ell in ELLS:
            for theta in THETAS:
                gamma = build_gamma(corner_polygonal(ell, theta))
                for p in PS:
                    exact = p_rotation_of(gamma, p)
                    assert _rel(brute_force_kp(gamma, p, 10_000), exact) <= 1e-8

    def test_equilateral_sum_of_closed_forms(self):
        c = make_parallel(1.0)
        P = inscribe_at_times(c, regular_times(c, 12))
        ell = float(np.mean(P.edge_lengths))
        expected = sum(fp_closed_form(ell, theta, 2.0) for theta in P.turning_angles())
        assert _rel(p_rotation(P, 2.0), expected) <= 1e-12

    def test_isometry_invariance(self):
        c = make_parallel(0.7)
        P = inscribe_at_times(c, regular_times(c, 9))
        base = p_rotation(P, 2.0)
        for seed in (0, 1, 2):
            assert _rel(p_rotation(P.rotated(random_rotation(seed)), 2.0), base) <= 1e-12

    def test_p1_is_total_turning(self):
        P = corner_polygonal(1e-6, 1.0)
        assert p_rotation(P, 1.0) == pytest.approx(1.0, rel=2e-6)


class TestGammaCsv:
    """Tests for write_gamma_csv."""

    def test_header_and_endpoints(self, tmp_path):
        gamma = build_gamma(corner_polygonal(0.2, 1.0))
        path = write_gamma_csv(gamma, tmp_path / "gamma.csv", n=200)
        lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
        assert lines[0] == ",".join(GAMMA_HEADER)
        first = [float(v) for v in lines[1].split(",")]
        last = [float(v) for v in lines[-1].split(",")]
        assert first[0] == 0.0
        assert last[0] == pytest.approx(gamma.length, rel=1e-12)
