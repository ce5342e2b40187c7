#!/usr/bin/env python3
"""
Unit tests for sphere_pcurv/experiments.py - studies and reports

Tests for:
- convergence_study on parallels and great circles
- relaxation_estimate and divergence flagging
- corner_blowup_study lower bounds and growth
- monotonicity_counterexample
- bend_table and conformal_check
- Report CSV/JSON persistence and read_report
- Schedule checks, skipped rows, determinism
"""

import math
import os
import sys

import pytest

sys.path.insert(0, '.')
from sphere_pcurv.config import reset_config
from sphere_pcurv.conformal import make_planar_circle
from sphere_pcurv.curve_model import make_corner_curve, make_great_circle, make_parallel
from sphere_pcurv.errors import RangeError, ScheduleError, ValidationError
from sphere_pcurv.experiments import (
    REPORT_TYPES,
    BendTableReport,
    ConvergenceReport,
    SkippedRow,
    bend_table,
    check_schedule,
    conformal_check,
    convergence_study,
    corner_blowup_study,
    monotonicity_counterexample,
    read_report,
    relaxation_estimate,
    total_curvature_study,
    write_report,
)

HALVING = tuple(0.2 * 2.0 ** -j for j in range(5))


@pytest.fixture(autouse=True)
def clean_config_env(monkeypatch):
    for key in list(os.environ):
        if key.startswith("SPHERE_PCURV_"):
            monkeypatch.delenv(key, raising=False)
    reset_config()
    yield
    reset_config()


@pytest.fixture(scope="module")
def parallel_report():
    reset_config()
    return convergence_study(make_parallel(math.pi / 3.0), 2.0, HALVING, threads=1)


# =============================================================================
# Convergence
# =============================================================================

class TestConvergenceStudy:
    """Tests for convergence_study."""

    def test_reference_on_parallel(self, parallel_report):
        assert parallel_report.reference == pytest.approx(math.pi / math.sqrt(3.0), rel=1e-10)

    def test_errors_decrease(self, parallel_report):
        assert len(parallel_report.rows) == 5
        assert parallel_report.errors_strictly_decreasing()
        assert parallel_report.final_rel_error <= 0.02

    def test_full_schedule_has_no_skipped_rows(self, parallel_report):
        assert parallel_report.skipped == ()
        assert len(parallel_report.rows) == len(HALVING)

    def test_modulus_decreases_along_rows(self, parallel_report):
        moduli = [r.modulus for r in parallel_report.rows]
        assert all(b < a for a, b in zip(moduli[:-1], moduli[1:]))
        assert all(r.modulus >= r.mesh - 1e-9 for r in parallel_report.rows)

    def test_p1_full_schedule(self):
        report = convergence_study(make_parallel(math.pi / 3.0), 1.0, HALVING, threads=1)
        assert report.skipped == ()
        assert [r.ell for r in report.rows] == list(HALVING)
        assert report.errors_strictly_decreasing()
        assert report.final_rel_error <= 0.02

    @pytest.mark.parametrize("p", [1.5, 3.0])
    def test_fine_scale_within_two_percent(self, p):
        report = convergence_study(make_parallel(math.pi / 3.0), p, (0.025, 0.0125), threads=1)
        assert report.skipped == ()
        assert report.reference == pytest.approx(math.pi * math.sqrt(3.0) * 3.0 ** (-p / 2.0), rel=1e-10)
        assert report.final_rel_error <= 0.02

    def test_accepted_with_configured_threshold(self, parallel_report):
        assert parallel_report.accepted()
        assert not parallel_report.accepted(rel_error=1e-12)

    def test_rows_follow_schedule(self, parallel_report):
        assert [r.ell for r in parallel_report.rows] == list(HALVING)
        hs = [r.h for r in parallel_report.rows]
        assert all(b > a for a, b in zip(hs[:-1], hs[1:]))
        assert all(r.modulus > 0.0 for r in parallel_report.rows)

    def test_p1_reference(self):
        report = convergence_study(make_parallel(math.pi / 3.0), 1.0, (0.2, 0.1), threads=1)
        assert report.reference == pytest.approx(2.0 * math.pi * math.cos(math.pi / 3.0), rel=1e-10)

    def test_great_circle_vanishes(self):
        report = convergence_study(make_great_circle(), 2.0, (0.2, 0.1, 0.05), threads=1)
        assert all(r.k_p <= 1e-8 for r in report.rows)
        assert report.reference <= 1e-12

    def test_threads_do_not_change_result(self, parallel_report):
        threaded = convergence_study(make_parallel(math.pi / 3.0), 2.0, HALVING, threads=4)
        assert threaded.to_csv() == parallel_report.to_csv()

    def test_failed_entry_is_skipped(self):
        report = convergence_study(make_parallel(0.2), 2.0, (0.5, 0.1), threads=1)
        assert [r.ell for r in report.rows] == [0.1]
        assert report.skipped == (SkippedRow(value=0.5, error="MarchingError", message=report.skipped[0].message),)

    def test_rejects_bad_schedule(self):
        with pytest.raises(ScheduleError):
            convergence_study(make_parallel(1.0), 2.0, (0.1, 0.2))

    def test_rejects_small_p(self):
        with pytest.raises(RangeError):
            convergence_study(make_parallel(1.0), 0.5, (0.1,))


class TestRelaxationEstimate:
    """Tests for relaxation_estimate."""

    def test_parallel_is_finite(self):
        report = relaxation_estimate(make_parallel(math.pi / 3.0), 2.0, (0.4, 0.2, 0.1, 0.05), threads=1)
        assert not report.diverging
        assert report.value == pytest.approx(math.pi / math.sqrt(3.0), rel=0.05)
        minima = [r.min_k_p for r in report.rows]
        assert all(b >= a for a, b in zip(minima[:-1], minima[1:]))

    def test_corner_grows(self):
        report = relaxation_estimate(make_corner_curve(math.pi / 2.0), 2.0, (0.4, 0.2, 0.1, 0.05), threads=1)
        assert report.rows[-1].min_k_p > 1.5 * report.rows[0].min_k_p

    def test_empty_admissible_set(self):
        with pytest.raises(ScheduleError):
            relaxation_estimate(make_parallel(1.0), 2.0, (0.01,), ell_schedule=(0.2,))


# =============================================================================
# Corner and counterexample
# =============================================================================

class TestCornerBlowup:
    """Tests for corner_blowup_study."""

    @pytest.fixture(scope="class")
    def report(self):
        reset_config()
        return corner_blowup_study(math.pi / 2.0, 2.0, (8, 16, 32, 64, 128))

    def test_lower_bound(self, report):
        assert all(r.k_p >= r.lower_bound for r in report.rows)

    def test_turning_angle_is_exact(self, report):
        assert max(report.angle_errors()) <= 1e-12

    def test_growth_ratio(self, report):
        ratios = dict(report.growth_ratios())
        assert all(ratio >= 1.8 for h, ratio in ratios.items() if h >= 32)

    def test_growth_accepted_with_configured_slack(self, report):
        assert report.growth_accepted()
        assert not report.growth_accepted(slack=-1.0)

    def test_p1_stays_near_turning_angle(self):
        report = corner_blowup_study(math.pi / 2.0, 1.0, (8, 16, 32, 64, 128))
        assert all(abs(r.k_p - math.pi / 2.0) <= 0.01 * math.pi / 2.0 for r in report.rows)
        assert all(abs(ratio - 1.0) <= 0.01 for _, ratio in report.growth_ratios())

    def test_small_angle_vanishes(self):
        report = corner_blowup_study(1e-6, 2.0, (16,))
        assert report.rows[0].k_p <= 1e-9

    def test_schedule_must_increase(self):
        with pytest.raises(ScheduleError):
            corner_blowup_study(math.pi / 2.0, 2.0, (16, 8))

    def test_schedule_inside_arms(self):
        with pytest.raises(ScheduleError):
            corner_blowup_study(math.pi / 2.0, 2.0, (1, 2), arm_length=0.5)


class TestCounterexample:
    """Tests for monotonicity_counterexample."""

    def test_margins_positive(self):
        report = monotonicity_counterexample(math.pi / 4.0, 6)
        assert report.holds
        assert report.result.refinement_margin > 0.0
        assert report.result.integral_margin > 0.0
        assert report.extra_time == pytest.approx(2.0 * math.pi * math.sin(math.pi / 4.0) / 12.0)

    def test_margins_shrink_with_n(self):
        results = [monotonicity_counterexample(math.pi / 4.0, n).result for n in (6, 12, 24)]
        refinement = [r.refinement_margin for r in results]
        integral = [r.integral_margin for r in results]
        assert all(m > 0.0 for m in refinement + integral)
        assert all(b < a for a, b in zip(refinement[:-1], refinement[1:]))
        assert all(b < a for a, b in zip(integral[:-1], integral[1:]))

    def test_equator_control(self):
        result = monotonicity_counterexample(math.pi / 2.0, 6).result
        assert abs(result.refinement_margin) <= 1e-10
        assert abs(result.integral_margin) <= 1e-10
        assert abs(result.k_star_P) <= 1e-10

    def test_rejects_small_n(self):
        with pytest.raises(ValidationError):
            monotonicity_counterexample(1.0, 2)

    def test_rejects_existing_vertex(self):
        with pytest.raises(ValidationError):
            monotonicity_counterexample(1.0, 6, p_extra_time=0.0)


# =============================================================================
# Bend table and conformal check
# =============================================================================

class TestBendTable:
    """Tests for bend_table."""

    @pytest.fixture(scope="class")
    def report(self):
        reset_config()
        return bend_table((0.5, 0.1, 0.02), (0.1, 0.5, 1.0, 2.0), (1.0, 1.5, 2.0, 3.0))

    def test_grid_size(self, report):
        assert len(report.rows) == 48
        assert all(r.pieces == 3 for r in report.rows)

    def test_closed_form_and_brute_force(self, report):
        assert max(r.closed_form_rel_error for r in report.rows) <= 1e-12
        assert max(r.brute_force_rel_error for r in report.rows) <= 1e-8
        assert max(r.max_tangent_mismatch for r in report.rows) <= 1e-8

    def test_random_rotation_changes_nothing(self, report):
        rotated = bend_table((0.5, 0.1, 0.02), (0.1, 0.5, 1.0, 2.0), (1.0, 1.5, 2.0, 3.0), seed=7)
        for a, b in zip(report.rows, rotated.rows):
            assert b.exact == pytest.approx(a.exact, rel=1e-12)

    def test_rejects_small_p(self):
        with pytest.raises(RangeError):
            bend_table((0.1,), (1.0,), (0.5,))


class TestConformalCheck:
    """Tests for conformal_check."""

    def test_default_curves(self):
        report = conformal_check(points=20)
        assert len(report.rows) == 5 * 20
        assert report.max_rel_error <= 1e-4

    def test_equator_image(self):
        geodesic = [r for r in conformal_check(points=10).rows if r.curve.startswith("circle:r=2.0")]
        assert geodesic
        assert all(r.k_formula <= 1e-8 for r in geodesic)

    def test_error_is_relative_for_small_curvature(self):
        # radius-3 circle maps to a parallel with |k| = 5/12
        rows = conformal_check([make_planar_circle(3.0)], points=5).rows
        for r in rows:
            assert r.k_numeric == pytest.approx(5.0 / 12.0, rel=1e-6)
            assert r.rel_error == abs(r.k_formula - r.k_numeric) / r.k_numeric
            assert r.rel_error <= 1e-4

    def test_error_is_absolute_on_geodesics(self):
        for r in conformal_check([make_planar_circle(2.0)], points=5).rows:
            assert r.rel_error == abs(r.k_formula - r.k_numeric)


class TestTotalCurvatureStudy:
    """Tests for total_curvature_study."""

    def test_parallel(self):
        report = total_curvature_study(make_parallel(math.pi / 3.0), (0.2, 0.1, 0.05), threads=1)
        assert report.reference == pytest.approx(math.pi, rel=1e-10)
        assert report.rows[-1].abs_error < report.rows[0].abs_error
        assert report.rows[-1].abs_error < 0.1


# =============================================================================
# Reports
# =============================================================================

class TestReports:
    """Tests for report persistence."""

    def test_csv_round_trip(self, tmp_path, parallel_report):
        path = write_report(parallel_report, tmp_path / "converge.csv")
        again = read_report(path)
        assert isinstance(again, ConvergenceReport)
        assert again == parallel_report

    def test_json_round_trip(self, tmp_path, parallel_report):
        path = write_report(parallel_report, tmp_path / "converge.json", fmt="json")
        assert read_report(path) == parallel_report

    def test_json_file_matches_to_json(self, tmp_path, parallel_report):
        path = write_report(parallel_report, tmp_path / "converge.json", fmt="json")
        assert path.read_bytes() == parallel_report.to_json().encode()

    def test_json_content_without_suffix(self, tmp_path, parallel_report):
        path = tmp_path / "converge.out"
        path.write_text(parallel_report.to_json())
        assert read_report(path) == parallel_report

    def test_csv_layout(self, parallel_report):
        text = parallel_report.to_csv()
        lines = text.splitlines()
        assert '# kind="convergence"' in lines
        header = [l for l in lines if not l.startswith("#")][0]
        assert header == "ell,h,mesh,modulus,k_p,reference,rel_error"

    def test_skipped_rows_survive(self, tmp_path):
        report = convergence_study(make_parallel(0.2), 2.0, (0.5, 0.1), threads=1)
        again = read_report(write_report(report, tmp_path / "r.csv"))
        assert again.skipped == report.skipped

    def test_seedless_bend_table(self, tmp_path):
        report = bend_table((0.1,), (1.0,), (2.0,), samples=500)
        again = read_report(write_report(report, tmp_path / "b.json", fmt="json"))
        assert isinstance(again, BendTableReport)
        assert again.seed is None
        assert again == report

    def test_registry(self):
        assert set(REPORT_TYPES) == {
            "convergence", "relaxation", "blowup", "counterexample",
            "bend-table", "conformal-check", "total-curvature",
        }

    def test_unknown_format(self, tmp_path, parallel_report):
        with pytest.raises(ValidationError):
            write_report(parallel_report, tmp_path / "x.txt", fmt="txt")

    def test_unknown_kind(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text('# kind="mystery"\na,b\n1,2\n')
        with pytest.raises(ValidationError):
            read_report(path)

    def test_wrong_kind_in_from_dict(self, parallel_report):
        data = parallel_report.to_dict()
        data["kind"] = "blowup"
        with pytest.raises(ValidationError):
            ConvergenceReport.from_dict(data)

    def test_deterministic(self):
        first = bend_table((0.1, 0.02), (0.5, 2.0), (2.0,), samples=1000, seed=3)
        second = bend_table((0.1, 0.02), (0.5, 2.0), (2.0,), samples=1000, seed=3)
        assert first.to_csv() == second.to_csv()
        assert first.to_json() == second.to_json()


class TestCheckSchedule:
    """Tests for check_schedule."""

    def test_decreasing_ok(self):
        assert check_schedule((0.2, 0.1), "ell") == [0.2, 0.1]

    def test_increasing_ok(self):
        assert check_schedule((8, 16), "h", increasing=True) == [8.0, 16.0]

    def test_not_monotone(self):
        with pytest.raises(ScheduleError, match="ell schedule not monotone"):
            check_schedule((0.1, 0.1), "ell")

    def test_empty(self):
        with pytest.raises(ScheduleError):
            check_schedule((), "eps")

    def test_nonpositive(self):
        with pytest.raises(ScheduleError):
            check_schedule((0.1, -0.1), "ell")

    def test_schedule_error_is_validation(self):
        with pytest.raises(ValidationError):
            check_schedule((), "ell")
