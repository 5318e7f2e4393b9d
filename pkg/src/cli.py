"""Command-line entry point: ``ltv-gain {analyze,l2e,bench,validate}``.

Exit codes: 0 converged (or valid), 1 input error, 2 not converged.
"""

import argparse
import asyncio
import logging
import sys
import time
from typing import List, Optional, Sequence

from .bench import run_bench
from .combined import combined_gain
from .config import AnalysisSettings
from .exceptions import (
    ConfigurationError,
    InvalidSystemError,
    LtvGainError,
    SpecError,
    UnreachableOutputError,
    UnsupportedOutputError,
)
from .gramian import gain_profile, solve_lde, wc_disturbance_l2e
from .power_iteration import power_iterate
from .rde_analysis import bisect
from .reporting import (
    AnalysisReport,
    write_bench_csv,
    write_gain_profile_csv,
    write_report,
    write_signal_csv,
)
from .spec_loader import load_spec, load_system

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_NOT_CONVERGED = 2

INPUT_ERRORS = (
    SpecError,
    ConfigurationError,
    InvalidSystemError,
    UnsupportedOutputError,
    UnreachableOutputError,
    OSError,
)


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from e


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ltv-gain", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="settings JSON file (see config/analysis_defaults.json)")
    parser.add_argument("--log-level", help="override the configured log level")
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="bound the induced gain of a system")
    analyze.add_argument("spec", help="system spec JSON")
    analyze.add_argument("--tol", type=float, default=5e-3, help="absolute tolerance eps_a")
    analyze.add_argument("--algo", choices=("power", "bisect", "combined"), default="combined")
    analyze.add_argument("--out", help="report path (default: stdout)")
    analyze.add_argument("--dist-out", help="CSV path for the achieving disturbance")
    analyze.add_argument("--seed", type=int)
    analyze.set_defaults(handler=cmd_analyze)

    l2e = sub.add_parser("l2e", help="L2-to-Euclidean gain profile from the output Gramian")
    l2e.add_argument("spec", help="system spec JSON")
    l2e.add_argument("--tau", default="all", help="comma-separated horizons, or 'all'")
    l2e.add_argument("--budget", type=float, default=1.0, help="disturbance-norm scale for the gains")
    l2e.add_argument("--out", default="-", help="gain-profile CSV path (default: stdout)")
    l2e.add_argument("--dist-out", help="CSV path for the worst-case disturbance (single --tau)")
    l2e.set_defaults(handler=cmd_l2e)

    bench = sub.add_parser("bench", help="time RDE solves against power-iteration steps")
    bench.add_argument("--orders", type=_int_list, default=[10, 50, 100])
    bench.add_argument("--samples", type=int, default=3)
    bench.add_argument("--horizon", type=float, default=10.0)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--tol", type=float, default=1e-2)
    bench.add_argument("--jobs", type=int, default=1, help="worker processes")
    bench.add_argument("--timing-only", action="store_true", help="skip the full-algorithm timings")
    bench.add_argument("--out", default="-", help="CSV path (default: stdout)")
    bench.set_defaults(handler=cmd_bench)

    check = sub.add_parser("validate", help="check a system spec")
    check.add_argument("spec", help="system spec JSON")
    check.set_defaults(handler=cmd_validate)
    return parser


def cmd_analyze(args: argparse.Namespace, settings: AnalysisSettings) -> int:
    spec = load_spec(args.spec)
    system = spec.to_system()
    settings = spec.apply_to(settings)
    if args.seed is not None:
        settings = settings.with_overrides({"seed": args.seed})
    extra = {"seed": settings.seed, "system": spec.name or args.spec}

    logger.info("Analyzing %s with %s (tol=%g)", args.spec, args.algo, args.tol)
    if args.algo == "power":
        started = time.perf_counter()
        result = power_iterate(system, tol=args.tol, settings=settings)
        report = AnalysisReport.from_power(result, args.tol, time.perf_counter() - started, **extra)
        disturbance = result.d_star
    else:
        run = bisect if args.algo == "bisect" else combined_gain
        bounds = run(system, args.tol, settings=settings)
        report = AnalysisReport.from_bounds(bounds, args.tol, **extra)
        disturbance = bounds.d_lb

    if args.dist_out:
        if disturbance is None:
            logger.warning("No disturbance achieves the lower bound; %s not written", args.dist_out)
        else:
            write_signal_csv(disturbance, args.dist_out)
            report.disturbance_csv = args.dist_out
    write_report(report, args.out)
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_l2e(args: argparse.Namespace, settings: AnalysisSettings) -> int:
    spec = load_spec(args.spec)
    system = spec.to_system()
    settings = spec.apply_to(settings)
    if system.n_I != 0:
        raise UnsupportedOutputError(
            f"{args.spec} has n_I = {system.n_I}; the Gramian gain covers terminal outputs only (n_I = 0)"
        )
    taus: Optional[Sequence[float]] = None if args.tau == "all" else _float_list(args.tau)
    if args.dist_out and (taus is None or len(taus) != 1):
        raise ConfigurationError("--dist-out needs exactly one --tau value")

    trace = solve_lde(system, settings)
    write_gain_profile_csv(gain_profile(trace, taus, args.budget), args.out)
    if args.dist_out:
        write_signal_csv(wc_disturbance_l2e(system, trace, taus[0]), args.dist_out)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace, settings: AnalysisSettings) -> int:
    rows = asyncio.run(
        run_bench(
            args.orders,
            samples=args.samples,
            horizon=args.horizon,
            seed=args.seed,
            tol=args.tol,
            jobs=args.jobs,
            timing_only=args.timing_only,
            settings=settings,
        )
    )
    write_bench_csv(rows, args.out)
    return EXIT_OK


def cmd_validate(args: argparse.Namespace, settings: AnalysisSettings) -> int:
    system = load_system(args.spec)
    print(
        f"{args.spec}: valid (n_x={system.n_x}, n_d={system.n_d}, "
        f"n_I={system.n_I}, n_E={system.n_E}, T={system.horizon:g})"
    )
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point for the ltv-gain command"""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        settings = AnalysisSettings.load(args.config)
        if args.log_level:
            settings = settings.with_overrides({"log_level": args.log_level})
    except ConfigurationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    logging.basicConfig(
        level=settings.log_level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    )

    try:
        return args.handler(args, settings)
    except SpecError as e:
        for message in e.messages:
            print(f"error: {message}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except INPUT_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except LtvGainError as e:
        logging.error(f"Analysis failed: {e}")
        return EXIT_INPUT_ERROR
    except KeyboardInterrupt:
        logging.info("Analysis stopped by user")
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
