"""Command-line entry point.

Exit codes: 0 ok, 1 invalid input, 2 a check or audit failed, 3 I/O error.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
from pathlib import Path
from typing import IO, Any, Sequence

from .formats import (
    ClauseConfig,
    SessionFormatError,
    dump_sessions,
    emit_report,
    load_config,
    load_report,
    preset_config,
    read_sessions,
)
from .kernel import DEFAULT_EPSILON, DomainError
from .pipeline import run_pipeline
from .synth import SCENARIOS, ScenarioSpec, generate_synthetic

EXIT_OK, EXIT_INVALID, EXIT_CHECKS, EXIT_IO = 0, 1, 2, 3
PRESETS = ("base", "all-clauses")


class _IOFailure(Exception):
    pass


def _common(p: argparse.ArgumentParser, top: bool = False) -> None:
    # subcommand copies use SUPPRESS so they only override when given
    d = (lambda v: v) if top else (lambda v: argparse.SUPPRESS)
    p.add_argument("--config", default=d(None), help="JSON config path or preset name (base, all-clauses)")
    p.add_argument("--epsilon", type=float, default=d(None), help="kernel regularizer override")
    p.add_argument("--seed", type=int, default=d(None), help="seed for generators and audit probes")
    p.add_argument("--format", choices=("json-lines", "table"), default=d("json-lines"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aas", description="Score and audit session streams.")
    _common(parser, top=True)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a seeded synthetic session stream")
    _common(g)
    g.add_argument("--scenario", choices=SCENARIOS, default="random")
    g.add_argument("--channels", type=int, default=4)
    g.add_argument("--steps", type=int, default=12)
    g.add_argument("--param", action="append", default=[], metavar="KEY=JSON",
                   help="scenario parameter, repeatable")
    g.add_argument("-o", "--output", default="-")

    for name, text in (
        ("score", "score sessions and run the configured clauses"),
        ("audit", "run the ontology audits only"),
        ("govern", "classify score drift and print a governance verdict"),
    ):
        s = sub.add_parser(name, help=text)
        _common(s)
        s.add_argument("sessions", nargs="?", default="-", help="session file, '-' for stdin")
        s.add_argument("-o", "--output", default="-")

    r = sub.add_parser("report", help="re-render a json-lines report")
    _common(r)
    r.add_argument("report", nargs="?", default="-", help="report file, '-' for stdin")
    r.add_argument("-o", "--output", default="-")
    return parser


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _IOFailure(f"cannot read {path}: {exc.strerror}") from None


def _write(path: str, data: bytes) -> None:
    if path == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
        return
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise _IOFailure(f"cannot write {path}: {exc.strerror}") from None


def _resolve_config(arg: str | None, n_channels: int, seed: int | None) -> ClauseConfig:
    if arg is None:
        cfg = preset_config("base", n_channels)
    elif arg in PRESETS:
        cfg = preset_config(arg, n_channels)
    else:
        try:
            cfg = load_config(arg)
        except OSError as exc:
            raise _IOFailure(f"cannot read config {arg}: {exc.strerror}") from None
    if seed is not None:
        cfg.seed = seed
    return cfg


def _parse_param(item: str) -> tuple[str, Any]:
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise DomainError(f"--param expects KEY=JSON, got {item!r}")
    try:
        return key, json.loads(raw)
    except json.JSONDecodeError:
        return key, raw


def _generate(args: argparse.Namespace) -> int:
    spec = ScenarioSpec(
        name=args.scenario,
        channels=args.channels,
        steps=args.steps,
        epsilon=DEFAULT_EPSILON if args.epsilon is None else args.epsilon,
        params=dict(_parse_param(p) for p in args.param),
    )
    sf = generate_synthetic(spec, 0 if args.seed is None else args.seed)
    _write(args.output, dump_sessions(sf).encode("utf-8"))
    return EXIT_OK


def _load(path: str):
    return read_sessions(io.StringIO(_read_text(path)))


def _run(args: argparse.Namespace, only: Sequence[str] | None) -> int:
    sf = _load(args.sessions)
    cfg = _resolve_config(args.config, sf.header.n_channels, args.seed)
    if only is not None:
        defaults = preset_config("all-clauses", max(2, sf.header.n_channels)).clauses
        cfg.clauses = {k: cfg.clauses.get(k, defaults[k]) for k in only}
    report = run_pipeline(sf, cfg, args.epsilon)
    _write(args.output, emit_report(report, args.format))
    return EXIT_OK if report.passed else EXIT_CHECKS


def _report(args: argparse.Namespace) -> int:
    try:
        report = load_report(_read_text(args.report))
    except json.JSONDecodeError as exc:
        raise DomainError(f"invalid report line {exc.lineno}: {exc.msg}") from None
    _write(args.output, emit_report(report, args.format))
    return EXIT_OK if report.passed else EXIT_CHECKS


def main(argv: Sequence[str] | None = None, stderr: IO[str] | None = None) -> int:
    err = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; here 2 means a failed check
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        if args.command == "generate":
            return _generate(args)
        if args.command == "score":
            return _run(args, None)
        if args.command == "audit":
            return _run(args, ("audit", "dedup"))
        if args.command == "govern":
            return _run(args, ("drift",))
        return _report(args)
    except _IOFailure as exc:
        print(f"aas: {exc}", file=err)
        return EXIT_IO
    except SessionFormatError as exc:
        print(f"aas: {exc}", file=err)
        return EXIT_INVALID
    except DomainError as exc:
        print(f"aas: {exc}", file=err)
        return EXIT_INVALID
    except BrokenPipeError:
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
