"""report --in DIR --out DIR [--metrics LIST] [--sweep COLUMN]"""

import argparse
import sys

from .core import ReportError, render_report


def build_parser():
    parser = argparse.ArgumentParser(
        prog="report",
        description="Render CI-bar plots and equivalence tables from "
                    "simulator CSV output.")
    parser.add_argument("--in", dest="in_dir", required=True,
                        help="directory holding summary.csv (and optionally "
                             "max_eqv.csv)")
    parser.add_argument("--out", dest="out_dir", required=True,
                        help="output directory for images and report.html")
    parser.add_argument("--metrics", help="comma-separated metric columns "
                                          "(default: all present)")
    parser.add_argument("--sweep", help="x-axis column (default: auto)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    metrics = args.metrics.split(",") if args.metrics else None
    try:
        out = render_report(args.in_dir, args.out_dir, metrics, args.sweep)
    except ReportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {len(out['images'])} images, {out['ci']}, {out['html']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
