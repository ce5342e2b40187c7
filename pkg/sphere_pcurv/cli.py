"""
Sphere p-curvature CLI - batch front end for the experiments.

Usage:
    sphere-pcurv converge --curve SPEC [--p P] [--ell L1,L2,...]
    sphere-pcurv relax --curve SPEC [--p P] [--eps E1,E2,...] [--ell ...]
    sphere-pcurv bend-table [--ell ...] [--theta ...] [--p P1,P2,...] [--seed N]
    sphere-pcurv conformal-check [--points N]
    sphere-pcurv corner [--theta T] [--p P] [--h H1,H2,...]
    sphere-pcurv counterexample [--phi PHI] [--n N] [--extra-time T]
    sphere-pcurv total-curvature --curve SPEC [--ell L1,L2,...]
    sphere-pcurv export-gamma --curve SPEC --ell L
    sphere-pcurv validate COMMAND [options of COMMAND]

Curve specs:
    great-circle, great-circle-doubled
    parallel:phi=1.0471975512[,turns=1]
    parallel-longitude:phi=0.7853981634
    corner:theta=1.5707963268[,arm=0.5]
    csv:path/to/samples.csv          (header t,x,y,z)

Common options:
    --out DIR          output directory (default: pcurv-out)
    --format csv|json  report format (default: csv)
    --degrees          read angles (phi, theta) in degrees
    --threads N        cap on worker threads (else SPHERE_PCURV_THREADS)
    --verbose          debug logging on stderr

Exit status: 0 success, 1 validation error, 2 numerical failure. Errors are
also written to stderr as one JSON record.
"""

import argparse
import dataclasses
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from . import __version__
from .bend_construction import build_gamma, write_gamma_csv
from .curve_model import (
    ParamCurve,
    load_sampled_curve,
    make_corner_curve,
    make_doubled_great_circle,
    make_great_circle,
    make_parallel,
    make_parallel_by_longitude,
)
from .display import RunDisplay
from .errors import EXIT_OK, EXIT_VALIDATION, PcurvError, ValidationError
from .experiments import (
    DEFAULT_ELL_SCHEDULE,
    Report,
    bend_table,
    check_schedule,
    conformal_check,
    convergence_study,
    corner_blowup_study,
    monotonicity_counterexample,
    relaxation_estimate,
    total_curvature_study,
    write_report,
)
from .polygonal import inscribe_equilateral, regular_times, write_polygonal_csv
from .run_logger import RunLogger
from .sphere_geom import ANTIPODAL_MARGIN, angle_between

logger = logging.getLogger(__name__)

COMMANDS = (
    "converge", "relax", "bend-table", "conformal-check", "corner", "counterexample",
    "total-curvature", "export-gamma",
)
ANGLE_KEYS = ("phi", "theta")

CURVE_FAMILIES: Dict[str, Tuple[Callable[..., ParamCurve], Tuple[str, ...]]] = {
    "great-circle": (make_great_circle, ("turns",)),
    "great-circle-doubled": (make_doubled_great_circle, ()),
    "parallel": (make_parallel, ("phi", "turns")),
    "parallel-longitude": (make_parallel_by_longitude, ("phi", "turns")),
    "corner": (lambda theta, arm=0.5: make_corner_curve(theta, arm), ("theta", "arm")),
}


# =============================================================================
# Configuration
# =============================================================================

@dataclass
class RunConfig:
    """One CLI invocation, parsed and converted to radians."""
    command: str
    curve: Optional[str] = None
    p: Tuple[float, ...] = (2.0,)
    ell: Optional[Tuple[float, ...]] = None
    eps: Optional[Tuple[float, ...]] = None
    theta: Optional[Tuple[float, ...]] = None
    h: Tuple[int, ...] = (8, 16, 32, 64, 128)
    phi: float = math.pi / 4.0
    n: int = 6
    extra_time: Optional[float] = None
    arm: float = 0.5
    points: int = 50
    samples: int = 10_000
    out: Path = Path("pcurv-out")
    fmt: str = "csv"
    seed: Optional[int] = None
    degrees: bool = False
    threads: Optional[int] = None
    exact_closing: bool = True
    verbose: bool = False

    def settings(self) -> Dict[str, object]:
        """The fields that matter for the command, for headers and the run log."""
        keys = {
            "converge": ("curve", "p", "ell", "exact_closing"),
            "relax": ("curve", "p", "eps", "ell", "exact_closing"),
            "bend-table": ("ell", "theta", "p", "samples", "seed"),
            "conformal-check": ("points",),
            "corner": ("theta", "p", "h", "arm"),
            "counterexample": ("phi", "n", "extra_time"),
            "total-curvature": ("curve", "ell"),
            "export-gamma": ("curve", "ell", "samples", "exact_closing"),
        }[self.command]
        return {k: getattr(self, k) for k in keys}


def parse_floats(text: str) -> Tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def parse_ints(text: str) -> Tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def parse_curve_spec(spec: str, degrees: bool = False) -> ParamCurve:
    """Build a curve from 'family' or 'family:key=value,...' (or 'csv:PATH')."""
    family, _, params = spec.partition(":")
    family = family.strip()
    if family == "csv":
        if not params:
            raise ValidationError("csv curve spec needs a path")
        return load_sampled_curve(params)
    if family not in CURVE_FAMILIES:
        raise ValidationError(f"unknown curve family {family!r}", {"known": sorted(CURVE_FAMILIES)})
    factory, allowed = CURVE_FAMILIES[family]
    kwargs = {}
    for item in filter(None, (p.strip() for p in params.split(","))):
        key, sep, value = item.partition("=")
        if not sep or key not in allowed:
            raise ValidationError(f"bad parameter {item!r} for curve family {family!r}", {"allowed": list(allowed)})
        try:
            number = float(value)
        except ValueError:
            raise ValidationError(f"parameter {key} of {family!r} is not a number: {value!r}")
        kwargs[key] = math.radians(number) if degrees and key in ANGLE_KEYS else number
    try:
        return factory(**kwargs)
    except TypeError as e:
        raise ValidationError(f"curve family {family!r} is missing a parameter: {e}")


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--curve", help="Curve spec, e.g. parallel:phi=1.0471975512")
    common.add_argument("--p", type=parse_floats, default=None, help="Exponent(s) p >= 1")
    common.add_argument("--ell", type=parse_floats, help="Edge-length schedule (decreasing)")
    common.add_argument("--eps", type=parse_floats, help="Modulus schedule for relax (decreasing)")
    common.add_argument("--theta", type=parse_floats, help="Turning angle(s)")
    common.add_argument("--h", type=parse_ints, default=None, help="Corner refinement schedule (increasing)")
    common.add_argument("--phi", type=float, default=None, help="Colatitude for counterexample")
    common.add_argument("--n", type=int, default=6, help="Polygon size for counterexample")
    common.add_argument("--extra-time", type=float, default=None, help="Extra vertex time for counterexample")
    common.add_argument("--arm", type=float, default=0.5, help="Corner arm length")
    common.add_argument("--points", type=int, default=50, help="Sample points per curve (conformal-check)")
    common.add_argument("--samples", type=int, default=10_000, help="Dense samples along gamma(P)")
    common.add_argument("--out", "-o", default="pcurv-out", help="Output directory")
    common.add_argument("--format", dest="fmt", choices=["csv", "json"], default="csv")
    common.add_argument("--seed", type=int, default=None, help="Seed for randomized checks")
    common.add_argument("--degrees", action="store_true", help="Angles in degrees")
    common.add_argument("--threads", type=int, default=None, help="Worker thread cap")
    common.add_argument("--exact-closing", dest="exact_closing", action="store_true", default=True,
                        help="Equal edges, edge length re-solved (default)")
    common.add_argument("--short-closing", dest="exact_closing", action="store_false",
                        help="Keep the short last edge of the marching")
    common.add_argument("--verbose", "-v", action="store_true", help="Debug logging on stderr")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sphere-pcurv",
        description="Discrete p-curvature of curves on the unit sphere",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = _common_parser()
    subparsers = parser.add_subparsers(dest="command", help="Available commands")
    helps = {
        "converge": "p-rotation of equilateral inscriptions vs the curvature integral",
        "relax": "relaxation estimate over a modulus schedule",
        "bend-table": "bend formula: closed form, exact and brute force",
        "conformal-check": "conformal curvature transform vs finite differences",
        "corner": "p-rotation blowup at a corner",
        "counterexample": "non-monotone rotation on a parallel",
        "total-curvature": "intrinsic rotation of inscriptions vs total curvature",
        "export-gamma": "export an inscribed polygonal and its glued curve",
    }
    for name in COMMANDS:
        subparsers.add_parser(name, parents=[common], help=helps[name])
    validate_parser = subparsers.add_parser("validate", parents=[common], help="Dry-run checks of a command")
    validate_parser.add_argument("target", choices=COMMANDS, help="Command to check")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    command = args.target if args.command == "validate" else args.command
    degrees = args.degrees
    to_rad = (lambda v: math.radians(v)) if degrees else (lambda v: v)
    config = RunConfig(
        command=command,
        curve=args.curve,
        ell=args.ell,
        eps=args.eps,
        theta=tuple(to_rad(v) for v in args.theta) if args.theta else None,
        n=args.n,
        extra_time=args.extra_time,
        arm=args.arm,
        points=args.points,
        samples=args.samples,
        out=Path(args.out),
        fmt=args.fmt,
        seed=args.seed,
        degrees=degrees,
        threads=args.threads,
        exact_closing=args.exact_closing,
        verbose=args.verbose,
    )
    if args.p is not None:
        config.p = args.p
    elif command == "bend-table":
        config.p = (1.0, 1.5, 2.0, 3.0)
    if args.h is not None:
        config.h = args.h
    if args.phi is not None:
        config.phi = to_rad(args.phi)
    return config


# =============================================================================
# validate
# =============================================================================

def validate(config: RunConfig) -> List[str]:
    """Dry-run diagnostics; an empty list means the config is runnable."""
    problems: List[str] = []

    def schedule(values, name, increasing=False):
        if values is None:
            return
        try:
            check_schedule(values, name, increasing=increasing)
        except PcurvError as e:
            problems.append(e.message)

    if any(p < 1.0 for p in config.p):
        problems.append("p must be at least 1")
    if config.command not in ("bend-table",) and len(config.p) != 1:
        problems.append(f"{config.command} takes a single p")
    schedule(config.ell, "ell")
    schedule(config.eps, "eps")
    if config.command == "corner":
        schedule(config.h, "h", increasing=True)
        if config.theta and len(config.theta) != 1:
            problems.append("corner takes a single theta")
        if config.h and 1.0 / config.h[0] >= config.arm:
            problems.append("h schedule reaches past the corner arms")
    if config.command == "counterexample":
        if config.n < 3:
            problems.append("counterexample needs n >= 3")
        if not (0.0 < config.phi < math.pi):
            problems.append("degenerate colatitude")
    if config.command == "export-gamma":
        if not config.ell or len(config.ell) != 1:
            problems.append("export-gamma takes a single ell")
        if config.fmt != "csv":
            problems.append("export-gamma writes CSV only")
    if config.threads is not None and config.threads < 1:
        problems.append("threads must be positive")

    if config.command in ("converge", "relax", "total-curvature", "export-gamma"):
        if not config.curve:
            problems.append(f"{config.command} needs --curve")
        else:
            problems.extend(_curve_diagnostics(config))
    return problems


def _curve_diagnostics(config: RunConfig) -> List[str]:
    try:
        c = parse_curve_spec(config.curve, config.degrees)
    except PcurvError as e:
        message = e.message
        if "colatitude" in message.lower():
            message = "degenerate colatitude"
        return [message]
    problems = []
    try:
        length = c.length
    except PcurvError as e:
        return [e.message]
    for ell in config.ell or ():
        if not (0.0 < ell < min(math.pi / 2.0, length)):
            problems.append(f"ell={ell} outside (0, min(pi/2, curve length {length:.6g}))")
    points = c.position(regular_times(c, 64))
    worst = max(angle_between(a, b) for a, b in zip(points[:-1], points[1:]))
    if worst >= math.pi - ANTIPODAL_MARGIN:
        problems.append("antipodal consecutive samples on the curve")
    return problems


# =============================================================================
# run
# =============================================================================

def _execute(config: RunConfig, run_logger: RunLogger, display: RunDisplay) -> Optional[Report]:
    p = config.p[0]
    if config.command == "converge":
        c = parse_curve_spec(config.curve, config.degrees)
        return convergence_study(c, p, config.ell or DEFAULT_ELL_SCHEDULE,
                                 exact_closing=config.exact_closing, threads=config.threads)
    if config.command == "relax":
        c = parse_curve_spec(config.curve, config.degrees)
        return relaxation_estimate(c, p, config.eps or (0.4, 0.2, 0.1, 0.05), config.ell,
                                   exact_closing=config.exact_closing, threads=config.threads)
    if config.command == "bend-table":
        return bend_table(config.ell or (0.5, 0.1, 0.02), config.theta or (0.1, 0.5, 1.0, 2.0),
                          config.p, samples=config.samples, seed=config.seed)
    if config.command == "conformal-check":
        return conformal_check(points=config.points)
    if config.command == "corner":
        theta = config.theta[0] if config.theta else math.pi / 2.0
        return corner_blowup_study(theta, p, config.h, arm_length=config.arm)
    if config.command == "counterexample":
        return monotonicity_counterexample(config.phi, config.n, config.extra_time)
    if config.command == "total-curvature":
        c = parse_curve_spec(config.curve, config.degrees)
        return total_curvature_study(c, config.ell or DEFAULT_ELL_SCHEDULE, threads=config.threads)
    if config.command == "export-gamma":
        c = parse_curve_spec(config.curve, config.degrees)
        P = inscribe_equilateral(c, config.ell[0], exact_closing=config.exact_closing)
        gamma = build_gamma(P)
        for path in (write_polygonal_csv(P, config.out / "polygonal.csv"),
                     write_gamma_csv(gamma, config.out / "gamma.csv", config.samples)):
            run_logger.log_artifact(path)
            display.artifact(str(path))
        return None
    raise ValidationError(f"unknown command {config.command!r}")


def report_path(config: RunConfig) -> Path:
    return config.out / f"{config.command}.{config.fmt}"


def run(config: RunConfig, display: Optional[RunDisplay] = None) -> int:
    """Execute one command; returns the exit status."""
    display = display or RunDisplay()
    run_logger = RunLogger(config.out, config.command)
    run_logger.log_run_start(config.command)
    run_logger.log_config(config.settings())
    try:
        problems = validate(config)
        if problems:
            raise ValidationError("; ".join(problems), {"diagnostics": problems})
        display.header(config.command, config.settings())
        report = _execute(config, run_logger, display)
        if report is not None:
            for row in report.rows:
                run_logger.log_row(json.dumps(dataclasses.asdict(row), sort_keys=True))
            path = write_report(report, report_path(config), config.fmt)
            run_logger.log_artifact(path)
            display.report_table(
                report.KIND, report.row_header(),
                [[getattr(r, k) for k in report.row_header()] for r in report.rows],
                {k: v for k, v in report.meta().items() if k != "skipped"},
            )
            display.artifact(str(path))
    except PcurvError as e:
        run_logger.log_error("Run failed", e)
        run_logger.log_run_complete(e.exit_code)
        sys.stderr.write(json.dumps(e.to_record(), sort_keys=True, default=str) + "\n")
        return e.exit_code
    run_logger.log_run_complete(EXIT_OK)
    return EXIT_OK


def _configure_logging(verbose: bool) -> None:
    if not verbose:
        return
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    package_logger = logging.getLogger("sphere_pcurv")
    package_logger.addHandler(handler)
    package_logger.setLevel(logging.DEBUG)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return EXIT_VALIDATION

    _configure_logging(args.verbose)
    config = config_from_args(args)
    if args.command == "validate":
        problems = validate(config)
        RunDisplay().diagnostics(problems)
        if problems:
            record = ValidationError("; ".join(problems), {"diagnostics": problems}).to_record()
            sys.stderr.write(json.dumps(record, sort_keys=True) + "\n")
            return EXIT_VALIDATION
        return EXIT_OK
    return run(config)
