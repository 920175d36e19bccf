"""Command-line front end.

    tracetype record  <program.mdyn> -o out.trace [--keep-partial]
    tracetype type    <trace> --config sub/base [--subject-prefix P] [--types]
    tracetype compare <trace> --configs sub/base,union/base,... [--no-wall]
    tracetype tagtest <trace>

Exit codes: 0 ok, 1 input failure, 2 usage error.  All outputs are UTF-8
CSV with a header row and are deterministic for identical inputs (the
compare command's wall_ms column is timing; pass --no-wall to drop it).
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .framework import analyze, run_typecheck
from .minidyn import MiniDynRuntimeError, parse_program
from .minidyn.interp import Interpreter
from .minidyn.parser import ParseError
from .systems import CONFIG_NAMES, get_plugin
from .tagtest import candidates_csv, detect_tag_tests
from .tracelang import (
    DoubleAssignment, TraceSyntaxError, UseBeforeDef, parse_trace,
    serialize_trace,
)

USAGE_ERROR = 2
INPUT_ERROR = 1


def _read_config_file(path: str) -> dict:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def _load_trace(path: str):
    try:
        return parse_trace(Path(path).read_bytes())
    except FileNotFoundError:
        print(f"error: no such trace file: {path}", file=sys.stderr)
        raise SystemExit(INPUT_ERROR)
    except (TraceSyntaxError, UseBeforeDef, DoubleAssignment) as err:
        print(f"error: {path}: {err}", file=sys.stderr)
        raise SystemExit(INPUT_ERROR)


def cmd_record(args) -> int:
    try:
        source = Path(args.program).read_text(encoding="utf-8")
    except FileNotFoundError:
        print(f"error: no such program: {args.program}", file=sys.stderr)
        return INPUT_ERROR
    try:
        program = parse_program(source, args.program)
    except ParseError as err:
        print(f"error: {err}", file=sys.stderr)
        return INPUT_ERROR
    interp = Interpreter(args.program)
    try:
        trace, info = interp.run(program)
    except MiniDynRuntimeError as err:
        print(f"error: {err}", file=sys.stderr)
        if args.keep_partial and err.partial_trace is not None:
            Path(args.out).write_bytes(serialize_trace(err.partial_trace))
            print(f"partial trace written to {args.out}", file=sys.stderr)
        return INPUT_ERROR
    Path(args.out).write_bytes(serialize_trace(trace))
    print(f"statements={info.statement_count} lines_executed={info.executed_lines}")
    return 0


def _plugin_or_exit(config: str):
    try:
        return get_plugin(config)
    except KeyError:
        print(f"error: unknown configuration {config!r}; choose from "
              f"{', '.join(CONFIG_NAMES)}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _fixed_row(config: str, report) -> str:
    ratios = report.ratios()
    cells = [f"{e}/{t}" for e, t in (ratios["ro_rw"], ratios["prototypal"],
                                     ratios["inheritance"])]
    return ",".join([config, *cells])


def cmd_type(args) -> int:
    trace = _load_trace(args.trace)
    plugin = _plugin_or_exit(args.config)
    prefixes = tuple(args.subject_prefix or ())
    analysis = analyze(trace, plugin)
    report = run_typecheck(analysis, subject_prefixes=prefixes)
    out = report.to_csv()
    if plugin.checker == "fixed":
        out += "config,ro_rw,prototypal,inheritance\n"
        out += _fixed_row(args.config, report) + "\n"
    if args.types:
        out += "types\n"
        for src, label, rendered in sorted(
                analysis.variable_types(),
                key=lambda r: (r[0].file if r[0] else "", r[0].line if r[0] else 0, r[1])):
            where = f"{src}: " if src else ""
            out += f"{where}{label} :: {rendered}\n"
    sys.stdout.write(out)
    return 0


def cmd_compare(args) -> int:
    configs = [c for c in args.configs.split(",") if c]
    if len(configs) < 2:
        print("error: compare needs at least two configurations", file=sys.stderr)
        return USAGE_ERROR
    plugins = [(_plugin_or_exit(c), c) for c in configs]
    trace = _load_trace(args.trace)
    prefixes = tuple(args.subject_prefix or ())
    header = "config,error_locations,total_errors"
    if not args.no_wall:
        header += ",wall_ms"
    rows, fixed_rows = [header], []
    for plugin, config in plugins:
        start = time.monotonic()
        report = run_typecheck(analyze(trace, plugin), subject_prefixes=prefixes)
        wall_ms = int((time.monotonic() - start) * 1000)
        row = f"{config},{report.error_locations},{report.total_errors}"
        if not args.no_wall:
            row += f",{wall_ms}"
        rows.append(row)
        if plugin.checker == "fixed":
            fixed_rows.append(_fixed_row(config, report))
    out = "\n".join(rows) + "\n"
    if fixed_rows:
        out += "config,ro_rw,prototypal,inheritance\n"
        out += "\n".join(fixed_rows) + "\n"
    sys.stdout.write(out)
    return 0


def cmd_tagtest(args) -> int:
    trace = _load_trace(args.trace)
    sys.stdout.write(candidates_csv(detect_tag_tests(trace)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tracetype",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("record", help="run a MiniDyn program and write its trace")
    p.add_argument("program")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--keep-partial", action="store_true",
                   help="write the partial trace when execution fails")
    p.set_defaults(fn=cmd_record)

    p = sub.add_parser("type", help="type-check a trace under one configuration")
    p.add_argument("trace")
    p.add_argument("--config", default=None)
    p.add_argument("--config-file", default=None,
                   help="key=value file supplying config and subject-prefix")
    p.add_argument("--subject-prefix", action="append",
                   help="count only errors at locations under this path prefix")
    p.add_argument("--types", action="store_true",
                   help="also print the merged type of every source variable")
    p.set_defaults(fn=cmd_type)

    p = sub.add_parser("compare", help="run several configurations side by side")
    p.add_argument("trace")
    p.add_argument("--configs", required=True,
                   help="comma-separated configuration names (at least two)")
    p.add_argument("--subject-prefix", action="append")
    p.add_argument("--no-wall", action="store_true",
                   help="omit the wall_ms timing column (byte-reproducible output)")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("tagtest", help="emit tag-test candidates for a trace")
    p.add_argument("trace")
    p.set_defaults(fn=cmd_tagtest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config_file", None):
        values = _read_config_file(args.config_file)
        if args.config is None and "config" in values:
            args.config = values["config"]
        if not args.subject_prefix and "subject-prefix" in values:
            args.subject_prefix = [values["subject-prefix"]]
    if getattr(args, "command", None) == "type" and not args.config:
        print("error: --config (or a config file) is required", file=sys.stderr)
        return USAGE_ERROR
    try:
        return args.fn(args)
    except SystemExit as err:
        return err.code if isinstance(err.code, int) else INPUT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
