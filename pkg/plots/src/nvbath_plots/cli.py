"""Command-line figure rendering.

    nvbath-render trace IN.csv OUT.png   register time-series panels
    nvbath-render hist  IN.csv OUT.svg   fidelity or error histograms

Exit codes: 0 success, 2 unusable input (schema mismatch, empty table,
unsupported output format).
"""

from __future__ import annotations

import argparse
import sys

from .csvdata import SchemaError
from .render import render_histogram, render_trace

EXIT_OK = 0
EXIT_INPUT = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nvbath-render",
        description="render figures from nvbath CSV artifacts")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind, blurb in (("trace", "multi-panel register time series"),
                        ("hist", "fidelity or expansion-error histograms")):
        p = sub.add_parser(kind, help=blurb)
        p.add_argument("input", metavar="IN.csv")
        p.add_argument("output", metavar="OUT.{png|svg}")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    render = render_trace if args.kind == "trace" else render_histogram
    try:
        render(args.input, args.output)
    except (SchemaError, OSError) as exc:
        print(f"nvbath-render: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(f"nvbath-render: wrote {args.output}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
