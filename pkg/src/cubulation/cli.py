"""``cubulation`` command line: parse an input file, run one analysis, print a report.

Exit codes: 0 success, 1 invalid input or usage, 2 size cap exceeded.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .errors import CubulationError, InputError, LimitError, PreconditionError
from .report import (
    AnalysisReport,
    build_spec,
    fixture_names,
    load_json,
    render_text,
    run_report,
)

FIXTURE_NOTES = {
    "c6_tetrahedron.json": "tubular: tetrahedron graph, edge groups (1,0), (0,1), (1,-1)",
    "croke_kleiner.json": "tubular: path RAAG A(P4) as a graph of Z^2's",
    "bs12_loop.json": "tubular: one vertex, self-loop (1,0) -> (2,0)",
    "double_loop.json": "tubular: self-loops (1,0) -> (2,0) and (0,1) -> (0,3)",
    "hyp_rel_gersten.json": "fbc: rose a,b,c,d; c, d with suffixes [a,b] and [a,b]^2",
    "more_than_gersten.json": "fbc: linear d, e with suffixes a, a^2; c with suffix b",
    "non_internal.json": "fbc: linear c from u to w with suffix d, not internal",
    "graph_manifold_like.json": "fbc: two cycles each supporting one linear stratum",
    "atoroidal.json": "fbc: single exponential stratum, no Nielsen cycles",
    "c6_rbf.json": "rbf: directions (1,0), (0,1), (1,-1) on the lattice",
    "hypercube3.json": "median: {0,1}^3",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--json", action="store_true", help="machine-readable JSON report")
    p.add_argument("--witness", action="store_true", help="embed and re-verify certificates")
    p.add_argument("--limit", type=int, default=None, help="raise the size cap of exponential searches")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="cubulation", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--fixtures", action="store_true", help="list bundled example inputs")
    sub = parser.add_subparsers(dest="kind", parser_class=_Parser)

    tub = sub.add_parser("tubular", help="tubular groups").add_subparsers(dest="op", required=True,
                                                                          parser_class=_Parser)
    tub.add_parser("analyze", parents=[common]).add_argument("input")

    fb = sub.add_parser("fbc", help="free-by-cyclic groups (IRTT input)").add_subparsers(
        dest="op", required=True, parser_class=_Parser)
    fb.add_parser("analyze", parents=[common]).add_argument("input")

    med = sub.add_parser("median", help="finite median algebras").add_subparsers(
        dest="op", required=True, parser_class=_Parser)
    for op in ("verify", "rank", "hull"):
        p = med.add_parser(op, parents=[common])
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("input", nargs="?")
        src.add_argument("--hypercube", type=int, metavar="N")
        src.add_argument("--box", metavar="D1,D2,...")
        if op == "hull":
            p.add_argument("--subset", required=True, help="elements separated by ';'")

    rb = sub.add_parser("rbf", help="richly branching flats").add_subparsers(
        dest="op", required=True, parser_class=_Parser)
    p = rb.add_parser("from-tubular", parents=[common])
    p.add_argument("input")
    p.add_argument("--vertex")
    rb.add_parser("from-fbc", parents=[common]).add_argument("input")
    p = rb.add_parser("build", parents=[common])
    p.add_argument("input")
    p.add_argument("--radius", type=int, default=5, help="half-width R of the base square (default 5)")
    p.add_argument("--depth", type=int, default=3, help="depth L of each half-strip (default 3)")
    rb.add_parser("validate", parents=[common]).add_argument("input")
    return parser


def _median_source(args) -> dict:
    if args.hypercube is not None:
        return {"hypercube": args.hypercube}
    if args.box is not None:
        try:
            return {"box": [int(d) for d in args.box.split(",")]}
        except ValueError:
            raise InputError(f"--box expects comma-separated integers, got {args.box!r}") from None
    return load_json(args.input)


def execute(args) -> AnalysisReport:
    if args.kind == "median":
        source = _median_source(args)
        spec = build_spec(source, "median", limit=args.limit)
        subset = [s for s in args.subset.split(";") if s] if args.op == "hull" else None
        return run_report(spec, "median", args.op, witness=args.witness, limit=args.limit,
                          source=source, subset=subset)
    if args.kind == "rbf":
        input_kind = {"from-tubular": "tubular", "from-fbc": "fbc"}.get(args.op, "rbf")
        source = load_json(args.input)
        spec = build_spec(source, input_kind, limit=args.limit)
        return run_report(spec, "rbf", args.op, witness=args.witness, source=source,
                          vertex=getattr(args, "vertex", None), radius=getattr(args, "radius", 1),
                          depth=getattr(args, "depth", 1))
    source = load_json(args.input)
    spec = build_spec(source, args.kind, limit=args.limit)
    return run_report(spec, args.kind, args.op, witness=args.witness, limit=args.limit, source=source)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors exit 1, --help/--version exit 0
        return exc.code if isinstance(exc.code, int) else 1
    if args.fixtures:
        for name in fixture_names():
            print(f"{name:28s} {FIXTURE_NOTES.get(name, '')}")
        return 0
    if args.kind is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        report = execute(args)
    except LimitError as exc:
        print(f"limit exceeded: {exc}", file=sys.stderr)
        return 2
    except (InputError, PreconditionError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 1
    except CubulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(report.dumps() if args.json else render_text(report))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
