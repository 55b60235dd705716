"""Command-line front end.

Exit status: 0 when the protocol is secure (or a non-analysis command
succeeds), 1 when an attack is found, 2 on usage, parse or resource errors.
``KFLOW_SEED`` is accepted and ignored; analysis is deterministic.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .dsl import ParseError, parse_file, render
from .engine import analyze
from .model import DEFAULT_MAX_UNIVERSE, Scenario, UniverseOverflow, build_universe, enumerate_bindings
from .output import report_dot, report_json
from .protocols import BUILTINS

EXIT_SECURE = 0
EXIT_ATTACK = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def positive(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def load_protocol(ref: str):
    """A built-in by name, or a ``.kf`` file by path."""
    if ref in BUILTINS:
        return BUILTINS[ref]()
    path = Path(ref)
    if path.suffix == ".kf" or path.exists():
        if not path.is_file():
            raise UsageError(f"no such file: {ref}")
        return parse_file(path)
    raise UsageError(f"unknown protocol {ref!r} (built-ins: {', '.join(BUILTINS)})")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kflow", description="Knowledge-flow security protocol analyzer.")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_flags(sp):
        sp.add_argument("--protocol", required=True, help="built-in name or path to a .kf file")
        sp.add_argument("--sessions", type=positive, default=1, help="parallel sessions w (default 1)")
        sp.add_argument("--honest", type=positive, default=2, help="honest principals (default 2)")
        sp.add_argument("--max-universe", type=positive, default=DEFAULT_MAX_UNIVERSE, help="universe size cap")

    a = sub.add_parser("analyze", help="search for an attack")
    scenario_flags(a)
    a.add_argument("--json", metavar="PATH", help="write the JSON report to PATH ('-' for stdout)")
    a.add_argument("--dot", metavar="PATH", help="write the attack derivation as Graphviz DOT")
    a.add_argument("--jobs", type=positive, default=os.cpu_count() or 1, help="worker processes")
    a.add_argument("--dump-universe", action="store_true", help="also print each binding's universe to stderr")
    a.add_argument("-v", "--verbose", action="store_true")

    sub.add_parser("list", help="list built-in protocols")

    ps = sub.add_parser("parse", help="parse a .kf file")
    ps.add_argument("path")
    ps.add_argument("--check", action="store_true", help="only validate; print nothing on success")

    d = sub.add_parser("dump-universe", help="print the value universe of every role binding")
    scenario_flags(d)
    return p


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _dump(protocol, args, out) -> None:
    scenario = Scenario.make(protocol, honest=args.honest, sessions=args.sessions)
    for binding in enumerate_bindings(scenario):
        u = build_universe(scenario, binding, args.max_universe)
        shown = "; ".join(" ".join(s) for s in binding)
        print(f"# binding {shown}: {len(u)} values, m={u.per_session}", file=out)
        for line in u.dump():
            print(line, file=out)


def cmd_analyze(args) -> int:
    protocol = load_protocol(args.protocol)
    if args.dump_universe:
        _dump(protocol, args, sys.stderr)
    report = analyze(protocol, args.sessions, args.honest, jobs=args.jobs, max_universe=args.max_universe)
    if args.json:
        _write(args.json, report_json(report))
    if args.dot:
        _write(args.dot, report_dot(report))
    if args.json != "-":
        print(f"{report.protocol}: {report.verdict} ({report.bindings_explored} binding(s) explored)")
        if args.verbose:
            print(f"universe size {report.universe_size}, {report.ms:.1f} ms")
        if report.attack:
            print("binding: " + "; ".join(" ".join(s) for s in report.binding))
            for i, s in enumerate(report.trace, 1):
                prem = ", ".join(s["premises"]) or "-"
                print(f"  {i:2d}. [{s['rule']}] {s['value']}  <=  {prem}")
    return EXIT_ATTACK if report.attack else EXIT_SECURE


def cmd_list(args) -> int:
    for name, make in BUILTINS.items():
        spec = make()
        print(f"{name}\troles={' '.join(spec.roles)}\trules={len(spec.schemas)}")
    return EXIT_SECURE


def cmd_parse(args) -> int:
    path = Path(args.path)
    if not path.is_file():
        raise UsageError(f"no such file: {args.path}")
    spec = parse_file(path)
    if not args.check:
        sys.stdout.write(render(spec))
    return EXIT_SECURE


def cmd_dump(args) -> int:
    _dump(load_protocol(args.protocol), args, sys.stdout)
    return EXIT_SECURE


COMMANDS = {"analyze": cmd_analyze, "list": cmd_list, "parse": cmd_parse, "dump-universe": cmd_dump}


def main(argv=None) -> int:
    os.environ.get("KFLOW_SEED")  # reserved
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_SECURE
    try:
        return COMMANDS[args.command](args)
    except ParseError as e:
        for d in e.diagnostics:
            print(d, file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, UniverseOverflow, OSError) as e:
        print(f"kflow: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
