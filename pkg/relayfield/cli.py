"""relayfield command line: outage, sweep, rates, region, validate, serve."""

from __future__ import annotations

import argparse
import logging
import sys
import tomllib
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from relayfield import __version__
from relayfield.config import ScenarioConfig, load_scenario, settings
from relayfield.errors import RelayFieldError, ValidationFailure
from relayfield.models import OutageReport, RateRow, RegionMap, SweepResult, ValidationReport
from relayfield.output import (
    OUTAGE_FIELDS,
    RATE_FIELDS,
    REGION_FIELDS,
    SWEEP_FIELDS,
    VALIDATION_FIELDS,
    outage_rows,
    rate_rows,
    region_rows,
    render_report_text,
    sweep_rows,
    sweep_traces,
    validation_rows,
    write_csv,
    write_json,
)
from relayfield.services import report as reports
from relayfield.services.search import check_dominance
from relayfield.services.validation import run_validation

logger = logging.getLogger("relayfield.cli")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

# CLI flag -> ScenarioConfig field
_OVERRIDES = {
    "seed": "seed",
    "trials": "trials",
    "partitions": "partitions",
    "threads": "threads",
    "out": "out_dir",
    "lam": "lam",
    "k": "k",
    "theta": "theta",
    "threshold": "threshold",
    "rho": "rho_mag",
}


def cmd_outage(config: ScenarioConfig) -> OutageReport:
    result = reports.outage_report(config)
    print(render_report_text(result))
    write_csv(config.out_dir / "outage.csv", OUTAGE_FIELDS, outage_rows(result))
    write_json(config.out_dir / "outage.json", result.model_dump(mode="json"))
    return result


def cmd_sweep(config: ScenarioConfig) -> SweepResult:
    result = reports.lambda_sweep(config)
    write_csv(config.out_dir / "sweep.csv", SWEEP_FIELDS, sweep_rows(result))
    write_json(
        config.out_dir / "sweep.json",
        {"scenario": reports.scenario_snapshot(config), **sweep_traces(result)},
    )
    print(f"sweep: {len(result.points)} points -> {config.out_dir / 'sweep.csv'}")
    return result


def cmd_rates(config: ScenarioConfig) -> list[RateRow]:
    rows = reports.rate_table(config)
    write_csv(config.out_dir / "rates.csv", RATE_FIELDS, rate_rows(rows))
    write_json(
        config.out_dir / "rates.json",
        {
            "scenario": reports.scenario_snapshot(config),
            "target": config.rate_target,
            "cf_entry": "upper-bound",
            "rows": rate_rows(rows),
        },
    )
    print(f"rates: {len(rows)} rows -> {config.out_dir / 'rates.csv'}")
    return rows


def cmd_region(config: ScenarioConfig) -> RegionMap:
    result = reports.region(config)
    violations = check_dominance(result)
    if violations:
        logger.warning("%d region cells fail the dominance re-check", len(violations))
    write_csv(config.out_dir / "region.csv", REGION_FIELDS, region_rows(result))
    write_json(
        config.out_dir / "region.json",
        {
            "scenario": reports.scenario_snapshot(config),
            "metadata": result.metadata,
            "precedence": [p.value for p in result.precedence],
            "dominance_violations": [[c.x, c.y] for c in violations],
            "w_c": [[c.x, c.y, c.w_c] for c in result.cells if c.valid],
        },
    )
    print(f"region: {result.counts()} -> {config.out_dir / 'region.csv'}")
    return result


def cmd_validate(config: ScenarioConfig) -> ValidationReport:
    result = run_validation(config)
    write_csv(config.out_dir / "validate.csv", VALIDATION_FIELDS, validation_rows(result))
    write_json(config.out_dir / "validate.json", result.model_dump(mode="json"))
    for check in result.checks:
        print(f"{'PASS' if check.passed else 'FAIL'}  {check.name}: {check.detail}")
    if not result.passed:
        names = ", ".join(c.name for c in result.failures())
        raise ValidationFailure(f"validation failed: {names}")
    return result


COMMANDS: dict[str, Callable[[ScenarioConfig], Any]] = {
    "outage": cmd_outage,
    "sweep": cmd_sweep,
    "rates": cmd_rates,
    "region": cmd_region,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relayfield",
        description="Outage of a relay link in a Poisson field of interferers.",
    )
    parser.add_argument("--version", action="version", version=f"relayfield {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, helptext in (
        ("outage", "every estimate at one scenario point"),
        ("sweep", "outage against interferer density"),
        ("rates", "maximum rate against relay position"),
        ("region", "winning protocol over a grid of relay positions"),
        ("validate", "analytic against Monte Carlo acceptance checks"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", type=Path, help="flat TOML scenario file")
        p.add_argument("--seed", type=int, help="64-bit Monte Carlo seed")
        p.add_argument("--trials", type=int, help="Monte Carlo trials")
        p.add_argument("--partitions", type=int, help="rectangles in the CF cover")
        p.add_argument("--with-mc", action="store_true", help="add Monte Carlo estimates")
        p.add_argument("--threads", type=int, help="parallel workers")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--lambda", dest="lam", type=float, help="interferer density")
        p.add_argument("--k", type=float, help="relay distance as a fraction of D")
        p.add_argument("--theta", type=float, help="relay angle in radians")
        p.add_argument("--threshold", type=float, help="SIR threshold T")
        p.add_argument("--rho", type=float, help="DF correlation magnitude")

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default=settings.host)
    serve.add_argument("--port", type=int, default=settings.port)
    return parser


def overrides_from(args: argparse.Namespace) -> dict[str, Any]:
    out = {field: getattr(args, flag) for flag, field in _OVERRIDES.items()}
    if args.with_mc:
        out["with_mc"] = True
    return {k: v for k, v in out.items() if v is not None}


def _config_errors(exc: ValidationError) -> str:
    return "\n".join(
        f"  {'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}"
        for err in exc.errors()
    )


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=settings.log_level.upper())

    if args.command == "serve":
        import uvicorn

        uvicorn.run("relayfield.main:app", host=args.host, port=args.port)
        return EXIT_OK

    try:
        config = load_scenario(args.config, overrides_from(args))
    except ValidationError as exc:
        print(f"invalid configuration:\n{_config_errors(exc)}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, tomllib.TOMLDecodeError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        COMMANDS[args.command](config)
    except ValidationFailure as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"cannot write results: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RelayFieldError as exc:
        logger.error("%s failed: %s", args.command, exc)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
