"""Command line: figures <kind> --in <csv...> --out <img>."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import KINDS, FigureError, FigureSpec, render


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="figures",
                                description="render figures from coarsegauss CSVs")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--in", dest="inputs", nargs="+", required=True,
                   metavar="CSV", help="input CSV file(s)")
    p.add_argument("--out", required=True, metavar="IMG",
                   help="output image path (.png or .svg)")
    return p


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    spec_out = Path(args.out)
    try:
        spec = FigureSpec(kind=args.kind,
                          inputs=tuple(Path(pth) for pth in args.inputs),
                          out=spec_out)
        print(render(spec))
    except FigureError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
