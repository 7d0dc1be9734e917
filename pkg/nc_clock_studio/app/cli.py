"""Command-line front end.

    python -m app.cli analyze network.json [--preset NAME] [--out report.json]
    python -m app.cli simulate fig12 [--horizon N] [--out traces.csv]
    python -m app.cli compare --hops 10 --format csv
    python -m app.cli validate-clock clock.json --preset tsn-nonsync
    python -m app.cli schema --out schemas/
    python -m app.cli serve

Reports go to stdout (or ``--out``), diagnostics to stderr. Exit codes: 0 ok,
1 input error, 2 analysis finished with instability or infeasibility warnings.
"""
import argparse
import json
import logging
import os
import sys
from typing import Any, List, Optional

from pydantic import ValidationError

from app.config import config
from app.schemas import (
    SCHEMA_VERSION,
    ClockValidationRequest,
    CompareRequest,
    network_json_schema,
    report_json_schema,
)
from app.services import runs
from app.services.netcalc.clocks import PRESETS
from app.services.netcalc.errors import NetCalcError
from app.services.netcalc.methods import COMPARE_METHODS, compare_to_csv
from app.services.netcalc.network import EXIT_INPUT_ERROR, EXIT_OK, EXIT_WARNING
from app.services.simulation.scenarios import SCENARIOS
from app.utils import dump_json, setup_logging

logger = logging.getLogger("app.cli")


class InputError(Exception):
    """Unreadable or malformed input file."""


def _load_json(path: str) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as e:
        raise InputError(f"{path}: {e.strerror or e}") from e
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from e


def _json_arg(text: Optional[str]) -> Any:
    """Inline JSON or ``@file``."""
    if text is None:
        return None
    if text.startswith("@"):
        return _load_json(text[1:])
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"invalid JSON argument: {e.msg}") from e


def format_validation_error(err: ValidationError) -> List[str]:
    """One ``/pointer: message`` line per pydantic error."""
    lines = []
    for e in err.errors():
        msg = e["msg"]
        if msg.startswith("Value error, "):
            msg = msg[len("Value error, "):]
        loc = "".join(f"/{p}" for p in e["loc"])
        lines.append(f"{loc}: {msg}" if loc else msg)
    return lines


def _write(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        logger.info("wrote %s", out)
    else:
        sys.stdout.write(text)


def cmd_analyze(args) -> int:
    payload = _load_json(args.network)
    if not isinstance(payload, dict):
        raise InputError(f"{args.network}: expected a JSON object")
    if args.preset:
        payload["envelope"] = {"preset": args.preset}
    report, code = runs.analyze(payload, stamp=args.stamp)
    _write(dump_json(report), args.out)
    return code


def cmd_simulate(args) -> int:
    scenario: Any = args.scenario
    if scenario not in SCENARIOS and (scenario.endswith(".json") or os.path.exists(scenario)):
        scenario = _load_json(scenario)
    params = _json_arg(args.params)
    if params is not None and not isinstance(params, dict):
        raise InputError("--params must be a JSON object")
    summary, output = runs.simulate(scenario, params, args.horizon, stamp=args.stamp)
    if args.out:
        _write(output.csv_text, args.out)
    _write(dump_json(summary), args.summary)
    if not output.result.predicate_pass:
        logger.warning("predicate failed: %s", output.result.predicate)
    return output.exit_code


def cmd_compare(args) -> int:
    body = {"hops": args.hops, "methods": args.methods.split(","), "envelope": {"preset": args.preset or "tsn-nonsync"}}
    for key in ("W", "delta", "r0", "b0", "ell", "rate", "latency"):
        value = getattr(args, key)
        if value is not None:
            body[key] = value
    rows = runs.compare(CompareRequest.model_validate(body))
    if args.format == "csv":
        _write(compare_to_csv(rows), args.out)
    else:
        _write(dump_json(runs.compare_json(rows)), args.out)
    return EXIT_OK


def cmd_validate_clock(args) -> int:
    clock = _load_json(args.clock)
    body = {"clock": clock, "envelope": {"preset": args.preset or config.DEFAULT_PRESET}}
    if args.envelope:
        body["envelope"] = _json_arg(args.envelope)
    if args.domain:
        body["domain"] = args.domain
    out = runs.validate_clock(ClockValidationRequest.model_validate(body))
    _write(dump_json(out), args.out)
    return EXIT_OK if out["valid"] else EXIT_WARNING


def cmd_schema(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    for name, schema in (("network.schema.json", network_json_schema()), ("report.schema.json", report_json_schema())):
        schema = {"$id": f"{name}#{SCHEMA_VERSION}", **schema}
        with open(os.path.join(args.out, name), "w", encoding="utf-8") as fh:
            fh.write(dump_json(schema))
    logger.info("schemas %s written to %s", SCHEMA_VERSION, args.out)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn
    uvicorn.run("app.main:app", host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nc-clock-studio", description="Network calculus bounds under nonideal clocks")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="per-hop and end-to-end bounds of a network description")
    p.add_argument("network", help="network description (JSON)")
    p.add_argument("--preset", choices=sorted(PRESETS), help="replace the envelope of the description")
    p.add_argument("--out", help="report file (default: stdout)")
    p.add_argument("--stamp", action="store_true", help="add a generation timestamp")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="run a named scenario or a scenario JSON")
    p.add_argument("scenario", help=f"one of {', '.join(SCENARIOS)} or a scenario JSON file")
    p.add_argument("--horizon", type=int, help="number of periods to simulate")
    p.add_argument("--params", help="parameter overrides, inline JSON or @file")
    p.add_argument("--out", help="traces CSV file")
    p.add_argument("--summary", help="summary JSON file (default: stdout)")
    p.add_argument("--stamp", action="store_true", help="add a generation timestamp")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="end-to-end bounds against path length")
    p.add_argument("--hops", type=int, default=10)
    p.add_argument("--methods", default=",".join(COMPARE_METHODS))
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--W", dest="W")
    p.add_argument("--delta")
    p.add_argument("--r0")
    p.add_argument("--b0")
    p.add_argument("--ell")
    p.add_argument("--rate")
    p.add_argument("--latency")
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("validate-clock", help="check a relative time function against an envelope")
    p.add_argument("clock", help="clock function (JSON)")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--envelope", help="explicit envelope, inline JSON or @file")
    p.add_argument("--domain", nargs=2, metavar=("FROM", "TO"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_validate_clock)

    p = sub.add_parser("schema", help="write the published JSON schemas")
    p.add_argument("--out", default="schemas")
    p.set_defaults(func=cmd_schema)

    p = sub.add_parser("serve", help="start the HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(verbose=args.verbose)
    try:
        return args.func(args)
    except ValidationError as e:
        for line in format_validation_error(e):
            logger.error(line)
        return EXIT_INPUT_ERROR
    except NetCalcError as e:
        logger.error("%s: %s", e.code, e)
        return EXIT_INPUT_ERROR
    except (InputError, ValueError) as e:
        logger.error("%s", e)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
