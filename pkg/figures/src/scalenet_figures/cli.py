"""Command line entry: render --kind K --in PATHS --out FILE.png"""

import argparse
import sys

from .plots import PLOT_KINDS, PlotSpec, RenderError, render


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="scalenet-render",
        description="render figures from scalenet run exports")
    ap.add_argument("--kind", required=True, choices=PLOT_KINDS)
    ap.add_argument("--in", dest="inputs", nargs="+", required=True,
                    metavar="PATH", help="run export files (csv/json)")
    ap.add_argument("--out", required=True, help="output image (.png)")
    ap.add_argument("--no-highlight", action="store_true",
                    help="do not single out disturbed agents")
    args = ap.parse_args(argv)
    try:
        spec = PlotSpec(kind=args.kind, inputs=args.inputs, out=args.out,
                        highlight=not args.no_highlight)
        render(spec)
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out} and {args.out}.data.csv")
    return 0


if __name__ == "__main__":
    sys.exit(main())
