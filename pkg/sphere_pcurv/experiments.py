"""
Sphere p-curvature - Experiments

Numerical studies over the library: convergence of the p-rotation of
equilateral inscriptions, the relaxation estimate over a modulus schedule,
corner blowup, the monotonicity counterexample on a parallel, the
bend-formula table, the conformal curvature check and total curvature.

Every study returns a report dataclass; reports carry no timestamps and
rows are assembled in schedule order, so identical inputs give identical
reports. Reports serialize to CSV (meta comment lines + rows) and JSON.
"""

import dataclasses
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, ClassVar, Dict, List, Optional, Sequence, Tuple, Type, TypeVar, Union

import numpy as np

from .bend_construction import (
    brute_force_kp,
    build_gamma,
    corner_polygonal,
    fp_closed_form,
    p_rotation,
    p_rotation_of,
)
from .conformal import (
    PlanarCurve,
    make_planar_circle,
    make_planar_line,
    make_planar_spiral,
    pushforward_curve,
    sphere_curvature_along,
)
from .config import get_config
from .curve_model import ParamCurve, integral_kp, make_corner_curve, make_parallel, total_curvature
from .errors import PcurvError, RangeError, ScheduleError, ValidationError
from .export import csv_text, json_text, parse_csv_text, read_json, write_json
from .polygonal import (
    inscribe_at_times,
    inscribe_equilateral,
    intrinsic_rotation,
    modulus,
    regular_times,
)
from .sphere_geom import random_rotation

logger = logging.getLogger(__name__)

DIVERGENCE_RATIO = 1.5
REFERENCE_FLOOR = 1e-12
# below this the conformal check reports absolute error (geodesic images)
CURVATURE_FLOOR = 1e-6
DEFAULT_ELL_SCHEDULE = (0.2, 0.1, 0.05, 0.025, 0.0125)

T = TypeVar("T")
R = TypeVar("R", bound="Report")


# =============================================================================
# Reports
# =============================================================================

@dataclass(frozen=True)
class SkippedRow:
    """A schedule entry that failed, with the error record."""
    value: float
    error: str
    message: str


@dataclass(frozen=True)
class Report:
    """
    Base for study reports: metadata fields plus a tuple of row dataclasses.

    Subclasses set KIND and ROW_TYPE and declare their metadata fields
    before rows.
    """
    KIND: ClassVar[str] = "report"
    ROW_TYPE: ClassVar[type] = object

    def meta(self) -> Dict[str, Any]:
        out = {}
        for f in dataclasses.fields(self):
            if f.name == "rows":
                continue
            value = getattr(self, f.name)
            if f.name == "skipped":
                value = [dataclasses.asdict(s) for s in value]
            out[f.name] = value
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.KIND,
            **self.meta(),
            "rows": [dataclasses.asdict(r) for r in self.rows],
        }

    @classmethod
    def from_dict(cls: Type[R], data: Dict[str, Any]) -> R:
        if data.get("kind") != cls.KIND:
            raise ValidationError(f"Expected a {cls.KIND} report, got {data.get('kind')!r}")
        kwargs = {}
        for f in dataclasses.fields(cls):
            if f.name == "rows":
                kwargs["rows"] = tuple(cls.ROW_TYPE(**row) for row in data["rows"])
            elif f.name == "skipped":
                kwargs["skipped"] = tuple(SkippedRow(**s) for s in data.get("skipped", []))
            elif f.name in data:
                kwargs[f.name] = data[f.name]
        return cls(**kwargs)

    @classmethod
    def row_header(cls) -> List[str]:
        return [f.name for f in dataclasses.fields(cls.ROW_TYPE)]

    def to_csv(self) -> str:
        meta = {"kind": json.dumps(self.KIND)}
        meta.update({k: json.dumps(v) for k, v in self.meta().items()})
        rows = [[getattr(r, name) for name in self.row_header()] for r in self.rows]
        return csv_text(self.row_header(), rows, meta)

    @classmethod
    def from_csv(cls: Type[R], text: str) -> R:
        meta, header, rows = parse_csv_text(text)
        if header != cls.row_header():
            raise ValidationError(f"Unexpected {cls.KIND} columns: {','.join(header)}")
        data: Dict[str, Any] = {k: json.loads(v) for k, v in meta.items()}
        types = {f.name: f.type for f in dataclasses.fields(cls.ROW_TYPE)}
        data["rows"] = [
            {name: _coerce(types[name], cell) for name, cell in zip(header, row)} for row in rows
        ]
        return cls.from_dict(data)

    def to_json(self) -> str:
        return json_text(self.to_dict())


def _coerce(kind: Any, cell: str) -> Any:
    if kind in (int, "int"):
        return int(cell)
    if kind in (float, "float"):
        return float(cell)
    if kind in (bool, "bool"):
        return cell == "true"
    return cell


def write_report(report: Report, path: Union[str, Path], fmt: str = "csv") -> Path:
    if fmt == "json":
        return write_json(path, report.to_dict())
    if fmt != "csv":
        raise ValidationError(f"Unknown report format {fmt!r}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(report.to_csv())
    return path


def _report_type(kind: Any, path: Union[str, Path]) -> Type[Report]:
    if kind not in REPORT_TYPES:
        raise ValidationError(f"Unknown report kind {kind!r} in {path}")
    return REPORT_TYPES[kind]


def read_report(path: Union[str, Path]) -> Report:
    """Re-parse a CSV or JSON report into its report type."""
    if Path(path).suffix == ".json":
        data = read_json(path)
        return _report_type(data.get("kind"), path).from_dict(data)
    with open(path, "r", newline="") as f:
        text = f.read()
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        return _report_type(data.get("kind"), path).from_dict(data)
    meta, _, _ = parse_csv_text(text)
    return _report_type(json.loads(meta.get("kind", "null")), path).from_csv(text)


@dataclass(frozen=True)
class ConvergenceRow:
    ell: float
    h: int
    mesh: float
    modulus: float
    k_p: float
    reference: float
    rel_error: float


@dataclass(frozen=True)
class ConvergenceReport(Report):
    KIND: ClassVar[str] = "convergence"
    ROW_TYPE: ClassVar[type] = ConvergenceRow
    curve: str
    p: float
    reference: float
    exact_closing: bool
    rows: Tuple[ConvergenceRow, ...]
    skipped: Tuple[SkippedRow, ...] = ()

    @property
    def rel_errors(self) -> List[float]:
        return [r.rel_error for r in self.rows]

    @property
    def final_rel_error(self) -> float:
        return self.rows[-1].rel_error

    def errors_strictly_decreasing(self) -> bool:
        errors = self.rel_errors
        return all(b < a for a, b in zip(errors[:-1], errors[1:]))

    def accepted(self, rel_error: Optional[float] = None) -> bool:
        """Errors shrink with ell and the last one is within rel_error."""
        if rel_error is None:
            rel_error = get_config().get_float("experiments.acceptance_rel_error")
        return bool(self.rows) and self.errors_strictly_decreasing() and self.final_rel_error <= rel_error


@dataclass(frozen=True)
class RelaxationRow:
    eps: float
    min_k_p: float
    candidates: int


@dataclass(frozen=True)
class RelaxationReport(Report):
    """The estimate is value, the minimum at the smallest eps."""
    KIND: ClassVar[str] = "relaxation"
    ROW_TYPE: ClassVar[type] = RelaxationRow
    curve: str
    p: float
    value: float
    diverging: bool
    rows: Tuple[RelaxationRow, ...]
    skipped: Tuple[SkippedRow, ...] = ()


@dataclass(frozen=True)
class BlowupRow:
    h: int
    theta_h: float
    lower_bound: float
    k_p: float


@dataclass(frozen=True)
class BlowupReport(Report):
    KIND: ClassVar[str] = "blowup"
    ROW_TYPE: ClassVar[type] = BlowupRow
    theta: float
    p: float
    arm_length: float
    rows: Tuple[BlowupRow, ...]

    def growth_ratios(self) -> List[Tuple[int, float]]:
        """(h, k_p(P_2h) / k_p(P_h)) for consecutive doubled entries."""
        return [
            (a.h, b.k_p / a.k_p)
            for a, b in zip(self.rows[:-1], self.rows[1:])
            if b.h == 2 * a.h and a.k_p > 0.0
        ]

    def angle_errors(self) -> List[float]:
        return [abs(r.theta_h - self.theta) for r in self.rows]

    def growth_accepted(self, min_h: int = 32, slack: Optional[float] = None) -> bool:
        """Every doubling from h >= min_h grows by at least (1 - slack) 2^(p-1)."""
        if slack is None:
            slack = get_config().get_float("experiments.blowup_ratio_slack")
        floor = (1.0 - slack) * 2.0 ** (self.p - 1.0)
        ratios = [r for h, r in self.growth_ratios() if h >= min_h]
        return bool(ratios) and all(r >= floor for r in ratios)


@dataclass(frozen=True)
class CounterexampleRow:
    k_star_P: float
    k_star_P_prime: float
    integral_k1: float
    refinement_margin: float
    integral_margin: float


@dataclass(frozen=True)
class CounterexampleReport(Report):
    KIND: ClassVar[str] = "counterexample"
    ROW_TYPE: ClassVar[type] = CounterexampleRow
    phi: float
    n: int
    extra_time: float
    rows: Tuple[CounterexampleRow, ...]

    @property
    def result(self) -> CounterexampleRow:
        return self.rows[0]

    @property
    def holds(self) -> bool:
        return self.result.refinement_margin > 0.0 and self.result.integral_margin > 0.0


@dataclass(frozen=True)
class BendRow:
    ell: float
    theta: float
    p: float
    closed_form: float
    exact: float
    brute_force: float
    closed_form_rel_error: float
    brute_force_rel_error: float
    max_tangent_mismatch: float
    pieces: int
    length_ratio: float


@dataclass(frozen=True)
class BendTableReport(Report):
    KIND: ClassVar[str] = "bend-table"
    ROW_TYPE: ClassVar[type] = BendRow
    samples: int
    seed: Optional[int]
    rows: Tuple[BendRow, ...]


@dataclass(frozen=True)
class ConformalRow:
    curve: str
    t: float
    k_formula: float
    k_numeric: float
    rel_error: float


@dataclass(frozen=True)
class ConformalCheckReport(Report):
    KIND: ClassVar[str] = "conformal-check"
    ROW_TYPE: ClassVar[type] = ConformalRow
    points: int
    rows: Tuple[ConformalRow, ...]

    @property
    def max_rel_error(self) -> float:
        return max((r.rel_error for r in self.rows), default=0.0)


@dataclass(frozen=True)
class TotalCurvatureRow:
    ell: float
    h: int
    mesh: float
    k_star: float
    reference: float
    abs_error: float


@dataclass(frozen=True)
class TotalCurvatureReport(Report):
    KIND: ClassVar[str] = "total-curvature"
    ROW_TYPE: ClassVar[type] = TotalCurvatureRow
    curve: str
    reference: float
    rows: Tuple[TotalCurvatureRow, ...]
    skipped: Tuple[SkippedRow, ...] = ()


REPORT_TYPES: Dict[str, Type[Report]] = {
    cls.KIND: cls
    for cls in (
        ConvergenceReport,
        RelaxationReport,
        BlowupReport,
        CounterexampleReport,
        BendTableReport,
        ConformalCheckReport,
        TotalCurvatureReport,
    )
}


# =============================================================================
# Helpers
# =============================================================================

def check_schedule(values: Sequence[float], name: str, increasing: bool = False) -> List[float]:
    """Nonempty, strictly monotone schedule of positive values."""
    values = [float(v) for v in values]
    if not values:
        raise ScheduleError(f"{name} schedule is empty")
    if any(v <= 0.0 for v in values):
        raise ScheduleError(f"{name} schedule must be positive", {"schedule": values})
    pairs = list(zip(values[:-1], values[1:]))
    ok = all(b > a for a, b in pairs) if increasing else all(b < a for a, b in pairs)
    if not ok:
        raise ScheduleError(f"{name} schedule not monotone", {"schedule": values})
    return values


def _check_p(p: float) -> None:
    if p < 1.0:
        raise RangeError(f"Exponent p must be at least 1, got {p}")


def _ordered_map(fn: Callable[[Any], T], items: Sequence[Any], threads: Optional[int]) -> List[T]:
    """map in schedule order, on a thread pool when more than one thread is allowed."""
    threads = get_config().threads if threads is None else max(1, threads)
    if threads == 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))


def _try_row(fn: Callable[[float], T], value: float) -> Union[T, SkippedRow]:
    try:
        return fn(value)
    except PcurvError as e:
        logger.warning("Skipping schedule entry %g: %s", value, e.message)
        return SkippedRow(value=value, error=type(e).__name__, message=e.message)


def _split(results: Sequence[Any]) -> Tuple[tuple, tuple]:
    rows = tuple(r for r in results if not isinstance(r, SkippedRow))
    skipped = tuple(r for r in results if isinstance(r, SkippedRow))
    return rows, skipped


# =============================================================================
# Studies
# =============================================================================

def convergence_study(
    c: ParamCurve,
    p: float,
    ell_schedule: Sequence[float] = DEFAULT_ELL_SCHEDULE,
    exact_closing: bool = True,
    n_samples: Optional[int] = None,
    threads: Optional[int] = None,
) -> ConvergenceReport:
    """p-rotation of equilateral inscriptions against the integral of |k|^p."""
    _check_p(p)
    schedule = check_schedule(ell_schedule, "ell")
    reference = integral_kp(c, p)

    def row(ell: float) -> ConvergenceRow:
        P = inscribe_equilateral(c, ell, exact_closing=exact_closing)
        k_p = p_rotation(P, p)
        rel_error = (
            abs(k_p - reference) / reference if reference > REFERENCE_FLOOR else abs(k_p - reference)
        )
        logger.info("ell=%g h=%d k_p=%.12g rel_error=%.3e", ell, P.h, k_p, rel_error)
        return ConvergenceRow(
            ell=ell,
            h=P.h,
            mesh=P.mesh,
            modulus=modulus(c, P, n_samples),
            k_p=k_p,
            reference=reference,
            rel_error=rel_error,
        )

    rows, skipped = _split(_ordered_map(lambda ell: _try_row(row, ell), schedule, threads))
    return ConvergenceReport(
        curve=c.descriptor, p=p, reference=reference, exact_closing=exact_closing,
        rows=rows, skipped=skipped,
    )


def relaxation_estimate(
    c: ParamCurve,
    p: float,
    eps_schedule: Sequence[float],
    ell_schedule: Optional[Sequence[float]] = None,
    exact_closing: bool = True,
    n_samples: Optional[int] = None,
    threads: Optional[int] = None,
) -> RelaxationReport:
    """
    Minimum p-rotation over equilateral inscriptions with modulus below eps.

    This bounds the relaxed functional from above over the equilateral
    family only. Without an explicit ell schedule, ell = eps/2 for every
    eps plus one finer level.
    """
    _check_p(p)
    eps_values = check_schedule(eps_schedule, "eps")
    if ell_schedule is None:
        ell_schedule = [e / 2.0 for e in eps_values] + [eps_values[-1] / 4.0]
    ell_values = check_schedule(ell_schedule, "ell")

    def candidate(ell: float) -> Tuple[float, float]:
        P = inscribe_equilateral(c, ell, exact_closing=exact_closing)
        return modulus(c, P, n_samples), p_rotation(P, p)

    results = _ordered_map(lambda ell: _try_row(candidate, ell), ell_values, threads)
    candidates = [r for r in results if not isinstance(r, SkippedRow)]
    skipped = tuple(r for r in results if isinstance(r, SkippedRow))

    rows = []
    for eps in eps_values:
        admissible = [k for mu, k in candidates if mu < eps]
        if not admissible:
            raise ScheduleError(f"No inscription with modulus below eps={eps}", {"eps": eps})
        rows.append(RelaxationRow(eps=eps, min_k_p=float(min(admissible)), candidates=len(admissible)))

    minima = [r.min_k_p for r in rows]
    diverging = (
        len(minima) >= 2
        and all(b > a for a, b in zip(minima[:-1], minima[1:]))
        and minima[-1] > DIVERGENCE_RATIO * minima[0]
    )
    if diverging:
        logger.warning("Relaxation minima grow along the eps schedule on %s", c.descriptor)
    return RelaxationReport(
        curve=c.descriptor, p=p, value=minima[-1], diverging=diverging,
        rows=tuple(rows), skipped=skipped,
    )


def corner_blowup_study(theta: float, p: float, h_schedule: Sequence[int],
                        arm_length: float = 0.5) -> BlowupReport:
    """Three-point inscriptions t_bar - 1/h, t_bar, t_bar + 1/h around a corner."""
    _check_p(p)
    hs = [int(h) for h in check_schedule(h_schedule, "h", increasing=True)]
    c = make_corner_curve(theta, arm_length)
    t_bar = c.corners[0]
    if 1.0 / hs[0] >= arm_length:
        raise ScheduleError(f"h={hs[0]} reaches past the corner arms", {"arm_length": arm_length})

    rows = []
    for h in hs:
        P = inscribe_at_times(c, [t_bar - 1.0 / h, t_bar, t_bar + 1.0 / h])
        theta_h = P.turning_angles()[0]
        k_p = p_rotation(P, p)
        rows.append(BlowupRow(h=h, theta_h=theta_h, lower_bound=h ** (p - 1.0) * theta_h ** p, k_p=k_p))
        logger.info("h=%d theta_h=%.12g k_p=%.12g", h, theta_h, k_p)
    return BlowupReport(theta=theta, p=p, arm_length=arm_length, rows=tuple(rows))


def monotonicity_counterexample(phi: float, n: int = 6,
                                p_extra_time: Optional[float] = None) -> CounterexampleReport:
    """
    Regular n-gon P inscribed in a full parallel versus P plus one vertex.

    Rotations are closed (the vertex where the polygonal returns to its
    start counts), compared with the integral of |k| over one turn.
    """
    if n < 3:
        raise ValidationError(f"Counterexample needs n >= 3, got {n}")
    c = make_parallel(phi)
    times = regular_times(c, n)
    extra = times[1] / 2.0 if p_extra_time is None else float(p_extra_time)
    if not (0.0 < extra < c.domain) or np.min(np.abs(times - extra)) <= 1e-12:
        raise ValidationError("Extra vertex time must be interior and distinct from the n-gon times",
                              {"extra_time": extra})

    P = inscribe_at_times(c, times)
    P_prime = inscribe_at_times(c, np.sort(np.append(times, extra)))
    k_P = intrinsic_rotation(P, closed=True)
    k_P_prime = intrinsic_rotation(P_prime, closed=True)
    integral = integral_kp(c, 1.0)
    row = CounterexampleRow(
        k_star_P=k_P,
        k_star_P_prime=k_P_prime,
        integral_k1=integral,
        refinement_margin=k_P - k_P_prime,
        integral_margin=k_P - integral,
    )
    logger.info("Counterexample phi=%g n=%d: margins %.6g, %.6g", phi, n,
                row.refinement_margin, row.integral_margin)
    return CounterexampleReport(phi=phi, n=n, extra_time=extra, rows=(row,))


def bend_table(ells: Sequence[float], thetas: Sequence[float], ps: Sequence[float],
               samples: int = 10_000, seed: Optional[int] = None) -> BendTableReport:
    """
    Closed form, exact per-arc sum and brute-force quadrature per (ell, theta, p).

    With a seed every corner is first moved by the same random rotation.
    """
    for p in ps:
        _check_p(p)
    rotation = None if seed is None else random_rotation(seed)
    rows = []
    for ell in ells:
        for theta in thetas:
            P = corner_polygonal(ell, theta)
            if rotation is not None:
                P = P.rotated(rotation)
            gamma = build_gamma(P)
            mismatch = gamma.max_junction_mismatch()
            ratio = gamma.length / P.length
            for p in ps:
                closed = fp_closed_form(ell, theta, p)
                exact = p_rotation_of(gamma, p)
                brute = brute_force_kp(gamma, p, samples)
                scale = max(abs(closed), np.finfo(float).tiny)
                rows.append(BendRow(
                    ell=float(ell), theta=float(theta), p=float(p),
                    closed_form=closed, exact=exact, brute_force=brute,
                    closed_form_rel_error=abs(exact - closed) / scale,
                    brute_force_rel_error=abs(brute - exact) / scale,
                    max_tangent_mismatch=mismatch,
                    pieces=len(gamma.pieces),
                    length_ratio=ratio,
                ))
    return BendTableReport(samples=samples, seed=seed, rows=tuple(rows))


def conformal_test_curves() -> List[PlanarCurve]:
    return [
        make_planar_line((-1.0, 0.0), (1.0, 0.0), length=2.0),
        make_planar_line((0.5, -1.0), (0.3, 1.0), length=2.0),
        make_planar_circle(2.0),
        make_planar_circle(1.0, center=(0.5, 0.3)),
        make_planar_spiral(),
    ]


def conformal_check(curves: Optional[Sequence[PlanarCurve]] = None, points: int = 50) -> ConformalCheckReport:
    """
    Curvature from the conformal transform against finite differences of
    the pushforward, evaluated at interior sample points.
    """
    curves = conformal_test_curves() if curves is None else list(curves)
    rows = []
    for g in curves:
        c = pushforward_curve(g)
        numeric = ParamCurve(domain=c.domain, position_fn=c.position_fn, descriptor=c.descriptor)
        margin = 0.01 * g.domain
        ts = np.linspace(margin, g.domain - margin, points)
        k_formula = np.abs(sphere_curvature_along(g, ts))
        k_numeric = numeric.curvature(ts)
        for t, kf, kn in zip(ts, k_formula, k_numeric):
            rows.append(ConformalRow(
                curve=g.descriptor, t=float(t), k_formula=float(kf), k_numeric=float(kn),
                rel_error=float(abs(kf - kn) / abs(kn) if abs(kn) > CURVATURE_FLOOR else abs(kf - kn)),
            ))
    return ConformalCheckReport(points=points, rows=tuple(rows))


def total_curvature_study(c: ParamCurve, ell_schedule: Sequence[float] = DEFAULT_ELL_SCHEDULE,
                          threads: Optional[int] = None) -> TotalCurvatureReport:
    """Intrinsic rotation of equilateral inscriptions against total curvature."""
    schedule = check_schedule(ell_schedule, "ell")
    reference = total_curvature(c)

    def row(ell: float) -> TotalCurvatureRow:
        P = inscribe_equilateral(c, ell)
        k_star = intrinsic_rotation(P)
        return TotalCurvatureRow(ell=ell, h=P.h, mesh=P.mesh, k_star=k_star,
                                 reference=reference, abs_error=abs(k_star - reference))

    rows, skipped = _split(_ordered_map(lambda ell: _try_row(row, ell), schedule, threads))
    return TotalCurvatureReport(curve=c.descriptor, reference=reference, rows=rows, skipped=skipped)
