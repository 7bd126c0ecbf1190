"""Command-line entry point.

Exit codes: 0 success, 1 scenario/config error, 2 runtime error,
3 audit found violations.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import re
import sys

from .scenario import ConfigError, build_and_run, load_scenario_file
from .trace import audit

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_VIOLATIONS = 0, 1, 2, 3


def parse_duration_ms(text: str) -> int:
    """``"30s"``, ``"1500ms"`` or a bare number of milliseconds."""
    m = re.fullmatch(r"\s*(\d+)\s*(ms|s)?\s*", text)
    if not m:
        raise argparse.ArgumentTypeError(f"invalid duration {text!r}")
    value = int(m.group(1))
    return value * 1000 if m.group(2) == "s" else value


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcsim", description="Multi-channel multi-interface Hello simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario")
    run.add_argument("scenario")
    run.add_argument("--seed", type=int)
    run.add_argument("--duration", type=parse_duration_ms, help="e.g. 30s, 500ms (bare numbers are ms)")
    run.add_argument("--trace", help="trace output path (overrides trace_path)")
    run.add_argument("--summary", choices=("text", "json-lines"), default="text")

    val = sub.add_parser("validate", help="check a scenario file")
    val.add_argument("scenario")

    aud = sub.add_parser("audit", help="audit a trace file")
    aud.add_argument("trace")
    aud.add_argument("--scenario", help="scenario that produced the trace; enables delivery replay")
    aud.add_argument("--duration", type=parse_duration_ms, help="run length if overridden at run time")
    return parser


def _load(path: str):
    try:
        return load_scenario_file(path)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from exc


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

    if args.command == "validate":
        try:
            _load(args.scenario)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"{args.scenario}: ok")
        return EXIT_OK

    if args.command == "run":
        try:
            cfg = _load(args.scenario)
            overrides = {}
            if args.seed is not None:
                if args.seed < 0:
                    raise ConfigError("seed: must be >= 0")
                overrides["seed"] = args.seed
            if args.duration is not None:
                overrides["duration_ms"] = args.duration
            if args.trace is not None:
                overrides["trace_path"] = args.trace
            cfg = dataclasses.replace(cfg, **overrides)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        try:
            result = build_and_run(cfg)
        except OSError as exc:
            print(f"runtime error: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        except Exception as exc:  # noqa: BLE001 - any engine failure is a runtime error
            logging.getLogger(__name__).exception("run failed")
            print(f"runtime error: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        if args.summary == "json-lines":
            print("\n".join(result.summary.json_lines()))
        else:
            print(result.summary.text())
        return EXIT_OK

    topology = None
    if args.scenario:
        try:
            cfg = _load(args.scenario)
            if args.duration is not None:
                cfg = dataclasses.replace(cfg, duration_ms=args.duration)
            topology = cfg.topology()
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    try:
        report = audit(args.trace, topology)
    except OSError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for v in report.violations:
        print(v)
    print(f"{args.trace}: {report.lines} lines, {len(report.violations)} violations")
    return EXIT_OK if report.ok else EXIT_VIOLATIONS


if __name__ == "__main__":
    sys.exit(main())
