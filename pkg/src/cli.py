"""Command Line Interface

Subcommands wiring the series engine, coefficient cache, Borel resummation,
spectral oracle and coherent-state layer together. Results go to stdout (or
--output), logs go to stderr.

Exit codes: 0 success, 1 verification failure, 2 usage or precondition
error, 3 configuration or cache error.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional, Tuple

from src.borel_resummation import (
    MIN_SINGULARITY_COEFFS,
    PADE_POLE,
    RATIO_TEST,
    BorelError,
    BorelLaplaceResummer,
    BorelSettings,
    borel_transform,
    fit_large_order,
    singularity_estimate,
)
from src.coefficient_cache import CacheError, CoefficientCache
from src.coherent_ops import (
    NORMALIZED,
    UNNORMALIZED,
    CoherentError,
    CoherentSettings,
    InstantonParams,
    ToeplitzSpec,
    TransSeriesParams,
    husimi_grid,
    parse_complex,
    parse_state,
    phi_values,
    sb_transform,
    toeplitz_element,
    transseries_energy,
)
from src.config_manager import ConfigManager, ConfigurationError
from src.logging_config import ErrorTracker, setup_resosc_logger
from src.report_writer import (
    SERIES_FORMATS,
    TOEPLITZ_FIELDS,
    format_float,
    format_frame,
    format_json_array,
    format_json_object,
    format_report,
    format_series,
    format_verification,
    write_output,
)
from src.series_engine import (
    TABLE_LEVELS,
    TABLE_ORDER,
    EnergySeries,
    SeriesError,
    generate_levels,
    verify_table,
)
from src.spectral_oracle import SpectralError, build_matrix, convergence_study, eigenvalues
from src.weyl_algebra import WeylAlgebraError


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_USAGE = 2
EXIT_ENVIRONMENT = 3

# Location quoted in the literature under the g/4 coupling convention
REFERENCE_SINGULARITY = -4.0 / 3.0
TRANSSERIES_FIELDS = ("level", "g", "lmax", "rayleigh_re", "rayleigh_im",
                      "perturbative", "value_re", "value_im")
SB_FIELDS = ("n", "z_re", "z_im", "re", "im", "expected_re", "expected_im")


def _cache(args: argparse.Namespace, config: ConfigManager,
           quarantine: bool = False) -> CoefficientCache:
    """Cache directory: RESOSC_CACHE_DIR, then --cache, then configuration

    With quarantine set, unreadable or disagreeing files move to a
    quarantine subdirectory of the cache instead of being deleted.
    """
    directory = Path(os.getenv("RESOSC_CACHE_DIR") or args.cache or config.get("cache.dir"))
    tracker = ErrorTracker(logger, str(directory / "quarantine")) if quarantine else None
    return CoefficientCache(str(directory), config.get("series.convention_tag", "table1-v1"),
                            tracker)


def _series(args: argparse.Namespace, config: ConfigManager, level: int,
            order: int) -> EnergySeries:
    return _cache(args, config).get_or_compute(
        level, order, table_cap=config.get("series.table_cap", 200))


def cmd_series(args: argparse.Namespace, config: ConfigManager) -> int:
    if args.level < 0 or args.order < 0:
        raise ValueError("--level and --order must be non-negative")
    series = _cache(args, config).get_or_compute(
        args.level, args.order,
        table_cap=config.get("series.table_cap", 200),
        include_wavefunction=args.include_wavefunction,
    )
    write_output(format_series(series, args.format), args.output)
    return EXIT_OK


def _parse_fault(text: str) -> Tuple[int, int]:
    try:
        level, order = (int(part) for part in text.split(","))
    except ValueError:
        raise ValueError(f"--inject-fault expects n,k, got {text!r}")
    if level not in TABLE_LEVELS or not 0 <= order <= TABLE_ORDER:
        raise ValueError(f"--inject-fault cell ({level}, {order}) is outside the table")
    return level, order


def cmd_verify_table(args: argparse.Namespace, config: ConfigManager) -> int:
    cache = _cache(args, config, quarantine=True)

    series = generate_levels(TABLE_LEVELS, TABLE_ORDER, workers=config.get("series.workers", 1))
    for s in series:
        cache.reconcile(s)

    if args.inject_fault:
        level, order = _parse_fault(args.inject_fault)
        s = series[level]
        coeffs = list(s.coeffs)
        coeffs[order] += 1
        series[level] = EnergySeries(level, tuple(coeffs))
        logger.warning(f"Injected fault at n={level}, k={order}")

    report = verify_table(series)
    write_output(format_verification(report), args.output)
    return EXIT_OK if report.passed else EXIT_VERIFICATION


def cmd_borel(args: argparse.Namespace, config: ConfigManager) -> int:
    settings = BorelSettings.from_config(config)
    if not args.g > 0:
        raise ValueError(f"--g must be positive, got {args.g}")
    L, M = args.pade if args.pade else (settings.pade_order, settings.pade_order)
    order = args.order if args.order is not None else L + M + 1
    if order < L + M:
        raise ValueError(f"--order {order} too small for [{L}/{M}]")

    series = _series(args, config, args.level, order)
    result = BorelLaplaceResummer(series, L, M, settings)(args.g)

    if not args.report:
        write_output(f"{format_float(result.value)}\n", args.output)
        return EXIT_OK

    records = [result.to_record()]
    if series.order + 1 < MIN_SINGULARITY_COEFFS:
        logger.info(f"Extending level {args.level} to order {MIN_SINGULARITY_COEFFS - 1} "
                    f"for the singularity records")
        series = _series(args, config, args.level, MIN_SINGULARITY_COEFFS - 1)
    borel = borel_transform(series)
    for method in (PADE_POLE, RATIO_TEST):
        records.append(singularity_estimate(borel, method, settings).to_record())
    write_output(format_report(records), args.output)
    return EXIT_OK


def _parse_int_list(text: str, flag: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part]
    except ValueError:
        raise ValueError(f"{flag} expects comma-separated integers, got {text!r}")


def cmd_spectrum(args: argparse.Namespace, config: ConfigManager) -> int:
    residual_factor = config.get("spectral.residual_factor", 1e-10)
    if args.study:
        dims = _parse_int_list(args.dims, "--dims")
        table = convergence_study(args.g, args.levels, dims,
                                  tol=config.get("spectral.convergence_tol", 1e-8),
                                  residual_factor=residual_factor)
        write_output(format_frame(table), args.output)
        return EXIT_OK

    dim = args.dim or config.get("spectral.dim", 256)
    result = eigenvalues(build_matrix(args.g, dim), args.levels, residual_factor)
    if args.csv:
        write_output(format_frame(result.to_frame()), args.output)
    else:
        write_output(" ".join(format_float(v) for v in result.eigenvalues) + "\n", args.output)
    return EXIT_OK


def cmd_asymptotics(args: argparse.Namespace, config: ConfigManager) -> int:
    settings = BorelSettings.from_config(config)
    series = _series(args, config, args.level, args.order)

    k_min, k_max = None, None
    if args.window:
        k_min, k_max = _parse_int_list(args.window, "--window")
    fit = fit_large_order(series, k_min, k_max, settings)

    borel = borel_transform(series)
    pole_order = min(borel.order, config.get("borel.singularity.max_order", 60))
    estimates = [
        singularity_estimate(borel.truncated(pole_order), PADE_POLE, settings),
        singularity_estimate(borel, RATIO_TEST, settings),
    ]

    records = fit.to_records() + [e.to_record() for e in estimates]
    records.append({"level": args.level, "method": "reference:xi_c", "order_used": 0,
                    "value": REFERENCE_SINGULARITY, "error_estimate": None, "stability": None})
    for e in estimates:
        logger.info(f"{e.method}: measured singularity {e.location.real:.6g}, "
                    f"reference {REFERENCE_SINGULARITY:.6g} under a g/4 coupling convention")
    write_output(format_report(records), args.output)
    return EXIT_OK


def cmd_husimi(args: argparse.Namespace, config: ConfigManager) -> int:
    settings = CoherentSettings.from_config(config)
    state = parse_state(args.state, settings)
    write_output(format_frame(husimi_grid(state, args.extent, args.grid)), args.output)
    return EXIT_OK


def _instanton_action(args: argparse.Namespace, config: ConfigManager,
                      settings: CoherentSettings) -> float:
    """--s-inst, then configuration, then the measured Borel singularity modulus"""
    if args.s_inst is not None:
        return args.s_inst
    if settings.s_inst is not None:
        return settings.s_inst
    order = config.get("borel.singularity.max_order", 60)
    borel = borel_transform(_series(args, config, args.level, order))
    estimate = singularity_estimate(borel, RATIO_TEST, BorelSettings.from_config(config))
    return abs(estimate.location)


def cmd_transseries(args: argparse.Namespace, config: ConfigManager) -> int:
    settings = CoherentSettings.from_config(config)
    theta = args.theta if args.theta is not None else settings.theta
    params = InstantonParams(_instanton_action(args, config, settings), args.g, theta)
    tp = TransSeriesParams(sigma=parse_complex(args.sigma), lmax=args.lmax,
                           level=args.level, b=args.b)
    result = transseries_energy(tp, params, settings=settings)
    record = {
        "level": result.level, "g": result.g, "lmax": args.lmax,
        "rayleigh_re": result.rayleigh.real, "rayleigh_im": result.rayleigh.imag,
        "perturbative": result.perturbative,
        "value_re": result.value.real, "value_im": result.value.imag,
    }
    write_output(format_json_object(record, TRANSSERIES_FIELDS) + "\n", args.output)
    return EXIT_OK


def cmd_sbtransform(args: argparse.Namespace, config: ConfigManager) -> int:
    settings = CoherentSettings.from_config(config)
    z = parse_complex(args.z)
    value = sb_transform(args.n, z, settings)
    expected = complex(phi_values(z, args.n + 1)[args.n])
    record = {"n": args.n, "z_re": z.real, "z_im": z.imag, "re": value.real, "im": value.imag,
              "expected_re": expected.real, "expected_im": expected.imag}
    write_output(format_json_object(record, SB_FIELDS) + "\n", args.output)
    return EXIT_OK


def cmd_toeplitz(args: argparse.Namespace, config: ConfigManager) -> int:
    settings = CoherentSettings.from_config(config)
    spec = ToeplitzSpec(args.symbol, args.measure)
    records = []
    for m in range(args.size):
        for n in range(args.size):
            value = toeplitz_element(spec, m, n, settings)
            records.append({"m": m, "n": n, "re": value.real, "im": value.imag,
                            "measure": args.measure, "symbol": args.symbol})
    write_output(format_json_array(records, TOEPLITZ_FIELDS), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config-dir", default="config", help="configuration directory")
    common.add_argument("--environment", default=None, help="environment overlay (dev, prod)")
    common.add_argument("--output", default=None, help="write results to FILE instead of stdout")
    common.add_argument("--cache", default=None, help="coefficient cache directory")

    parser = argparse.ArgumentParser(
        prog="resosc",
        description="Resurgent analysis of the quartic oscillator in the Bargmann representation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("series", parents=[common], help="exact energy coefficients")
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--format", choices=SERIES_FORMATS, default="text")
    p.add_argument("--include-wavefunction", action="store_true",
                   help="store wavefunction coefficients in the cache file")
    p.set_defaults(handler=cmd_series)

    p = sub.add_parser("verify-table", parents=[common], help="check the seven-level table")
    p.add_argument("--inject-fault", default=None, help=argparse.SUPPRESS)
    p.set_defaults(handler=cmd_verify_table)

    p = sub.add_parser("borel", parents=[common], help="Borel-Pade-Laplace sum")
    p.add_argument("--level", type=int, default=0)
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--pade", type=int, nargs=2, metavar=("L", "M"), default=None)
    p.add_argument("--g", type=float, required=True)
    p.add_argument("--report", action="store_true", help="emit JSON report records")
    p.set_defaults(handler=cmd_borel)

    p = sub.add_parser("spectrum", parents=[common], help="truncated-basis eigenvalues")
    p.add_argument("--g", type=float, default=0.0)
    p.add_argument("--levels", type=int, default=5)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--study", action="store_true", help="convergence table over --dims")
    p.add_argument("--dims", default="64,128,256")
    p.add_argument("--csv", action="store_true", help="emit g,N,level,eigenvalue,residual")
    p.set_defaults(handler=cmd_spectrum)

    p = sub.add_parser("asymptotics", parents=[common], help="large-order and singularity report")
    p.add_argument("--level", type=int, default=0)
    p.add_argument("--order", type=int, default=120)
    p.add_argument("--window", default=None, help="k_min,k_max")
    p.set_defaults(handler=cmd_asymptotics)

    p = sub.add_parser("husimi", parents=[common], help="Husimi function grid")
    p.add_argument("--state", required=True, help="coherent:<complex> or fock:<n>")
    p.add_argument("--grid", type=int, default=400)
    p.add_argument("--extent", type=float, default=8.0)
    p.set_defaults(handler=cmd_husimi)

    p = sub.add_parser("transseries", parents=[common], help="instanton-corrected energy")
    p.add_argument("--level", type=int, default=0)
    p.add_argument("--lmax", type=int, default=0)
    p.add_argument("--g", type=float, required=True)
    p.add_argument("--sigma", default="0")
    p.add_argument("--s-inst", type=float, default=None)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--b", type=float, default=0.0)
    p.set_defaults(handler=cmd_transseries)

    p = sub.add_parser("sbtransform", parents=[common], help="transform of a Hermite function")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--z", required=True)
    p.set_defaults(handler=cmd_sbtransform)

    p = sub.add_parser("toeplitz", parents=[common], help="Toeplitz matrix elements")
    p.add_argument("--symbol", required=True)
    p.add_argument("--size", type=int, default=6)
    p.add_argument("--measure", choices=[NORMALIZED, UNNORMALIZED], default=NORMALIZED)
    p.set_defaults(handler=cmd_toeplitz)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK

    try:
        config = ConfigManager(args.config_dir, args.environment)
    except ConfigurationError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_ENVIRONMENT
    setup_resosc_logger(config)

    try:
        return args.handler(args, config)
    except (ConfigurationError, CacheError) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ENVIRONMENT
    except (ValueError, SeriesError, BorelError, SpectralError, CoherentError,
            WeylAlgebraError) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
