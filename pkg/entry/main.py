"""
Command-line entry point: hofer polytope | verify | certify
"""
import argparse
import os
import sys
from typing import Any, Dict, List, Optional

from loguru import logger
from pydantic import ValidationError

from entry.config import get_settings, load_config_file
from entry.core.certify import run_certify
from entry.core.figures import OVERLAYS, render_polytope
from entry.core.reports import print_summary, write_json_report, write_text_report
from entry.core.suites import run_suites
from entry.models import Command, ManifoldChoice, RunConfig, RunReport, Suite
from entry.utils.error_handling import (
    EXIT_ERROR,
    EXIT_FAIL,
    EXIT_PASS,
    exit_code_for,
    log_operation_failure,
    remediation_hint,
)
from hofer.errors import ConfigError, HoferError

LOG_FORMAT = (
    "<green>{time:HH:mm:ss}</green> | <cyan>{module:>16}:{line}</cyan> | "
    "<level>{level: >8}</level> | <level>{message}</level>"
)


def _add_common_options(parser: argparse.ArgumentParser) -> None:
    # Defaults are suppressed so that only flags actually given override the config file
    run_group = parser.add_argument_group("Run Options")
    run_group.add_argument("--manifold", choices=[m.value for m in ManifoldChoice], default=argparse.SUPPRESS,
                           help="Manifold model (default: cp2)")
    run_group.add_argument("--lambda", dest="lam", type=float, default=argparse.SUPPRESS,
                           help="Blow-up radius λ in (0, 1) (default: 0.5)")
    run_group.add_argument("--disk-area", type=float, default=argparse.SUPPRESS,
                           help="Area of the disk factor (default: 1)")
    run_group.add_argument("--hamiltonian", type=str, default=argparse.SUPPRESS,
                           help="P, Q, a scaled variant like 2P, or an expression in P, Q, A, t")
    run_group.add_argument("--epsilon", type=float, default=argparse.SUPPRESS,
                           help="Embedding slack ε (default: 0.05)")
    run_group.add_argument("--nu", type=float, default=argparse.SUPPRESS,
                           help="Graph region thickening ν (default: 0.1)")
    run_group.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="Random seed (default: 7)")
    run_group.add_argument("--samples", type=int, default=argparse.SUPPRESS,
                           help="Probe and sample count (default: 10000)")
    run_group.add_argument("--tol", type=float, default=argparse.SUPPRESS,
                           help="Integrator tolerance (default: 1e-9)")

    output_group = parser.add_argument_group("Output Options")
    output_group.add_argument("--out", type=str, default=argparse.SUPPRESS, help="Output directory (default: out)")
    output_group.add_argument("--config", type=str, default=None, help="key=value config file; flags win over it")
    output_group.add_argument("--debug", action="store_true", help="Enable debug logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hofer", description="Hofer-geometry verification and certificates")
    commands = parser.add_subparsers(dest="command", required=True)

    polytope = commands.add_parser(Command.POLYTOPE.value, help="Draw a moment polytope with optional overlays")
    _add_common_options(polytope)
    polytope.add_argument("--overlay", choices=OVERLAYS, default=argparse.SUPPRESS,
                          help="Embedding image or rectangle family to overlay")
    polytope.add_argument("--s", type=float, default=argparse.SUPPRESS,
                          help="Ball radius for point overlays")

    verify = commands.add_parser(Command.VERIFY.value, help="Run verification suites")
    _add_common_options(verify)
    verify.add_argument("--suite", choices=[s.value for s in Suite], default=argparse.SUPPRESS,
                        help="Suite to run (default: all)")

    certify = commands.add_parser(Command.CERTIFY.value, help="Certify length minimality of a Hamiltonian path")
    _add_common_options(certify)
    certify.add_argument("--r1-blowup", type=float, default=argparse.SUPPRESS,
                         help="User-asserted r₁ for the blow-up (recorded with its provenance)")
    return parser


def build_config(args: argparse.Namespace) -> RunConfig:
    """
    Merge settings with precedence flags > config file > environment > defaults.

    Raises:
        ConfigError: unknown config keys or invalid values
    """
    values: Dict[str, Any] = dict(get_settings().as_defaults())
    if args.config:
        file_values = load_config_file(args.config)
        if "lambda" in file_values:
            file_values["lam"] = file_values.pop("lambda")
        values.update(file_values)
    flags = {k: v for k, v in vars(args).items() if k not in ("config", "debug")}
    values.update(flags)
    try:
        return RunConfig(**values)
    except ValidationError as e:
        problems = [f"{'.'.join(map(str, err['loc']))}: {err['msg']}" for err in e.errors()]
        raise ConfigError("Invalid configuration: " + "; ".join(problems), {"problems": problems}) from e


def configure_logging(debug: bool) -> None:
    logger.enable("hofer")
    logger.enable("entry")
    if debug:
        logger.remove()
        logger.add(sys.stderr, format=LOG_FORMAT, colorize=True, level="DEBUG")


def _write_reports(report: RunReport, out: str) -> List[str]:
    return [write_json_report(report, out), write_text_report(report, out)]


def cmd_polytope(cfg: RunConfig) -> int:
    files = render_polytope(cfg)
    report = RunReport(command=cfg.command, config=cfg.summary(), passed=True,
                       files=[os.path.basename(f) for f in files])
    _write_reports(report, cfg.out)
    return EXIT_PASS


def cmd_verify(cfg: RunConfig) -> int:
    reports = run_suites(cfg)
    print_summary(reports)
    passed = all(r.passed for r in reports)
    results = {"suites": [{**r.model_dump(mode="json"), "passed": r.passed} for r in reports]}
    failures = [r.first_failure for r in reports if not r.passed]
    if failures:
        results["first_failure"] = {"suite": failures[0].suite.value, "check": failures[0].name}
        logger.error(f"❌ First failure: {failures[0].suite.value} / {failures[0].name}")
    report = RunReport(command=cfg.command, config=cfg.summary(), passed=passed, results=results)
    _write_reports(report, cfg.out)
    return EXIT_PASS if passed else EXIT_FAIL


def cmd_certify(cfg: RunConfig) -> int:
    outcome = run_certify(cfg)
    report = RunReport(command=cfg.command, config=cfg.summary(), passed=outcome.passed,
                       results={"certify": outcome.to_dict()})
    _write_reports(report, cfg.out)
    return EXIT_PASS if outcome.passed else EXIT_FAIL


COMMANDS = {
    Command.POLYTOPE: cmd_polytope,
    Command.VERIFY: cmd_verify,
    Command.CERTIFY: cmd_certify,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main function; returns the process exit code"""
    args = build_parser().parse_args(argv)
    configure_logging(args.debug)
    cfg = None
    try:
        cfg = build_config(args)
        return COMMANDS[cfg.command](cfg)
    except HoferError as e:
        log_operation_failure(args.command, e)
        hint = remediation_hint(e)
        if hint:
            logger.error(f"❌ Hint: {hint}")
        if cfg is not None:
            error = {**e.to_dict(), "hint": hint}
            report = RunReport(command=cfg.command, config=cfg.summary(), passed=False, error=error)
            try:
                _write_reports(report, cfg.out)
            except OSError as write_error:
                logger.error(f"❌ Could not write the error report: {write_error}")
        return exit_code_for(e)
    except Exception as e:
        log_operation_failure(args.command, e)
        logger.opt(exception=e).debug("Unhandled error")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
