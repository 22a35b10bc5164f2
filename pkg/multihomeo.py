#!/usr/bin/env python3
"""
Multihomeo
==========

Command-line entry point of the multiplier-homeomorphism experiments.
Each subcommand runs one pipeline, writes its JSON report and CSV tables to
the output directory and prints a short summary.

Usage:
    python multihomeo.py thm1 --grid 1024 --p 1.5,4
    python multihomeo.py remark5 --jitter on --n-max 32
    python multihomeo.py selftest

Exit status is 0 when every acceptance check passed, 1 on failed checks or
stage errors, 2 on bad usage.
"""

import argparse
import json
import logging
import sys
from typing import Dict, List, Optional

from homeo_config import SCENARIOS, ExperimentConfig, load_config, load_environment, worker_count
from homeo_experiments import ReportFormatter, RunReport, run_scenario
from homeo_spectral import set_fft_workers

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s',
    handlers=[
        logging.StreamHandler()
    ]
)

logger = logging.getLogger(__name__)


def _p_list(text: str) -> List[float]:
    try:
        values = [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of exponents, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty exponent list")
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='Path to a JSON configuration file')
    common.add_argument('--out', help='Output directory (default: MULTIHOMEO_OUT or results)')
    common.add_argument('--seed', type=int, help='Master seed')
    common.add_argument('--grid', type=int, help='Grid size N (power of two)')
    common.add_argument('--p', type=_p_list, help='Comma-separated exponents, e.g. 1.5,4')
    common.add_argument('--dim', type=int, choices=(1, 2, 3), help='Dimension d')
    common.add_argument('--jitter', choices=('on', 'off'), help='Jittered beta net children')
    common.add_argument('--trials', type=int, help='Random trials of empirical constants')
    common.add_argument('--n-max', type=int, dest='n_max', help='Largest character index of remark5')
    common.add_argument('--verbose', action='store_true', help='Enable verbose (debug) output')

    parser = argparse.ArgumentParser(
        description='Construct homeomorphisms h making f o h a Fourier multiplier and check the bounds')
    subparsers = parser.add_subparsers(dest='scenario', metavar='SCENARIO')
    subparsers.required = True
    helps = {
        "thm1": "Approximants and multiplier norms of f o h on R^d",
        "thm2": "The torus version through phi_1 and h_2",
        "remark5": "Norms of e^(i n phi_1) against a slowly growing gamma(n)",
        "bohr-pal": "Partial sums of |c_k|^p for f and f o h",
        "lp-audit": "Empirical Littlewood-Paley constants under dyadic refinement",
        "selftest": "Fast exactness and sandwich checks",
    }
    for scenario in SCENARIOS:
        subparsers.add_parser(scenario, parents=[common], help=helps[scenario])
    return parser


def apply_overrides(config: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    """
    Overlay command-line flags on a loaded configuration.

    Args:
        config: Configuration loaded from file
        args: Parsed arguments

    Returns:
        The same config, updated in place
    """
    config.scenario = args.scenario
    if args.out is not None:
        config.out_dir = args.out
    if args.seed is not None:
        config.seed = args.seed
    if args.grid is not None:
        config.grid = args.grid
    if args.p is not None:
        config.p_values = args.p
        if args.scenario == "remark5":
            config.character_p = args.p
    if args.dim is not None:
        config.dim = args.dim
    if args.jitter is not None:
        config.jitter = args.jitter == "on"
    if args.trials is not None:
        config.trials = args.trials
    if args.n_max is not None:
        config.n_max = args.n_max
    return config


def summarize(report: RunReport, paths: Optional[Dict[str, str]] = None) -> Dict:
    failed = report.failed_checks()
    return {
        "scenario": report.scenario,
        "success": report.success,
        "checks": len(report.checks),
        "acceptance_checks": sum(1 for c in report.checks if c.acceptance),
        "failed": [{"name": c.name, "measured": c.measured, "bound": c.bound, "p": c.p,
                    "N": c.N, "n": c.n, "rank": c.rank} for c in failed],
        "flags": report.flags,
        "error": report.error,
        "artifacts": paths or {},
    }


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main entry point for the script.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
        logger.debug("Verbose mode enabled")

    formatter = ReportFormatter()
    try:
        load_environment()
        set_fft_workers(worker_count())
        config = apply_overrides(load_config(args.config), args)
        config.validate()
    except (ValueError, FileNotFoundError, json.JSONDecodeError) as e:
        logger.error(f"Configuration error: {e}")
        _output_result({"scenario": args.scenario, "success": False,
                        "operations_log": [f"ERROR: {e}"]})
        return 1

    logger.info(f"Running {config.scenario} with N={config.grid}, d={config.dim}, seed={config.seed}")
    report = run_scenario(config)
    try:
        paths = formatter.write(report, config.out_dir)
    except OSError as e:
        logger.error(f"Error writing report to {config.out_dir}: {e}")
        paths = None
        report.error = report.error or {"stage": "write", "type": type(e).__name__, "message": str(e)}

    _output_result(summarize(report, paths))
    if report.error:
        logger.error(f"Stage '{report.error['stage']}' failed: {report.error['message']}")
        return 1
    if not report.success:
        logger.warning(f"{len(report.failed_checks())} acceptance checks failed")
        return 1
    logger.info("All acceptance checks passed")
    return 0


def _output_result(output: Dict) -> None:
    """Print a result dict as indented JSON on stdout."""
    print(json.dumps(output, indent=2, ensure_ascii=False))


if __name__ == "__main__":
    sys.exit(main())
