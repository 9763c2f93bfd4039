"""Command-line entry point: ``mediumband {ber,pdf,bound,preset}``.

Exit codes: 0 success, 2 validation error, 3 I/O error, 4 fit non-convergence.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .experiments import (
    PRESET_NAMES,
    cmd_ber,
    cmd_bound,
    cmd_pdf,
    preset,
    resolve_params,
    scenario_from_text,
    scenario_to_text,
    snr_grid,
)
from .fading_stats import BimodalParams, FitError

log = logging.getLogger("mediumband")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_FIT = 0, 2, 3, 4


def _scenario_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", default="scenario2",
                   help="preset name (see 'preset list'); default scenario2")
    p.add_argument("--scenario-file", type=Path,
                   help="key = value scenario file; overrides --scenario")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--sync-rule", choices=("max_h", "earliest_path"))
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _snr_args(p: argparse.ArgumentParser, start: float, stop: float, step: float) -> None:
    p.add_argument("--snr-start-db", type=float, default=start)
    p.add_argument("--snr-stop-db", type=float, default=stop)
    p.add_argument("--snr-step-db", type=float, default=step)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mediumband", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    ber = sub.add_parser("ber", help="Monte Carlo BER sweep with analytical references")
    _scenario_args(ber)
    _snr_args(ber, 0.0, 25.0, 5.0)
    ber.add_argument("--detector", choices=("method1", "method2", "both"), default="both")
    ber.add_argument("--min-errors", type=int, default=200)
    ber.add_argument("--max-bits", type=int, default=100_000_000)
    ber.add_argument("--params", help="bound parameters: 'table1:<pds>' or a fit JSON; "
                                      "default fits on simulated h_o")
    ber.add_argument("--fit-samples", type=int, default=200_000)
    ber.add_argument("--workers", type=int, default=1)

    pdf = sub.add_parser("pdf", help="h_o / g_o histograms and bimodal fit")
    _scenario_args(pdf)
    pdf.add_argument("--samples", type=int, default=1_000_000)
    pdf.add_argument("--bins", type=int, default=200)

    bound = sub.add_parser("bound", help="lower bound, asymptote, series and Rayleigh curves")
    bound.add_argument("--params", default="table1:60",
                       help="'table1:<pds>' or a fit JSON file (default table1:60)")
    bound.add_argument("--k", type=float, help="explicit trench depth (with --sigma-o2/--sigma-i2)")
    bound.add_argument("--sigma-o2", type=float)
    bound.add_argument("--sigma-i2", type=float)
    _snr_args(bound, 0.0, 50.0, 1.0)
    bound.add_argument("--out", type=Path, required=True)
    bound.add_argument("--format", choices=("csv", "json"), default="csv")

    pre = sub.add_parser("preset", help="list presets or print one as a scenario file")
    pre_sub = pre.add_subparsers(dest="action", required=True)
    pre_sub.add_parser("list")
    show = pre_sub.add_parser("show")
    show.add_argument("name")
    return parser


def _load_scenario(args):
    if args.scenario_file is not None:
        scenario = scenario_from_text(args.scenario_file.read_text())
    else:
        scenario = preset(args.scenario)
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    if args.sync_rule is not None:
        scenario = replace(scenario, sync_rule=args.sync_rule)
    return scenario


def _run(args) -> int:
    if args.command == "preset":
        if args.action == "list":
            for name in PRESET_NAMES:
                s = preset(name)
                print(f"{name:16s} PDS={s.pds:5.1f}%  {s.profile.kind:11s} kappa={s.profile.kappa:g}")
        else:
            sys.stdout.write(scenario_to_text(preset(args.name)))
        return EXIT_OK

    if args.command == "bound":
        grid = snr_grid(args.snr_start_db, args.snr_stop_db, args.snr_step_db)
        if args.k is not None:
            if args.sigma_o2 is None or args.sigma_i2 is None:
                raise ValueError("--k needs --sigma-o2 and --sigma-i2")
            if args.sigma_o2 <= 0 or args.sigma_i2 < 0:
                raise ValueError("variances must be positive")
            params = BimodalParams.from_variances(args.k, args.sigma_i2, args.sigma_o2)
            info = {"source": "explicit"}
        else:
            params, info = resolve_params(args.params)
        res = cmd_bound(params, grid, args.out, fmt=args.format, params_info=info)
        log.info("wrote %s", ", ".join(map(str, res["files"])))
        return EXIT_OK

    scenario = _load_scenario(args)
    if args.command == "ber":
        grid = snr_grid(args.snr_start_db, args.snr_stop_db, args.snr_step_db)
        detectors = ("method1", "method2") if args.detector == "both" else (args.detector,)
        if args.min_errors < 1 or args.max_bits < 1:
            raise ValueError("--min-errors and --max-bits must be positive")
        params, info = resolve_params(args.params, scenario, args.fit_samples)
        res = cmd_ber(scenario, grid, args.out, detectors=detectors, fmt=args.format,
                      min_errors=args.min_errors, max_bits=args.max_bits,
                      params=params, params_info=info, workers=args.workers)
    else:
        if args.samples < 100_000:
            raise ValueError("--samples must be at least 100000")
        res = cmd_pdf(scenario, args.samples, args.bins, args.out, fmt=args.format)
    log.info("wrote %s", ", ".join(map(str, res["files"])))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return _run(args)
    except FitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FIT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
