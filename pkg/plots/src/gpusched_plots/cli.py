"""Command line: ``plots <kind> --in <csv...> --out <png> [--zoom a,b]``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import KINDS, FigureError, FigureSpec, plot


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plots", description=__doc__)
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--in", dest="inputs", nargs="+", required=True, help="input CSV file(s)")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--zoom", default=None, help="x-axis range, e.g. 0.9,1.0")
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        zoom = None
        if args.zoom is not None:
            parts = args.zoom.split(",")
            if len(parts) != 2:
                raise FigureError(f"bad --zoom {args.zoom!r}; expected a,b")
            zoom = (float(parts[0]), float(parts[1]))
        for path in args.inputs:
            if not Path(path).exists():
                raise FigureError(f"input not found: {path}")
        spec = FigureSpec(args.kind, tuple(Path(p) for p in args.inputs), Path(args.out), zoom)
        plot(spec)
        return 0
    except (FigureError, ValueError) as exc:
        print(f"plots: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
