"""lavdm-plot: render experiment CSVs to figures.

Exit codes: 0 on success, 2 on a CSV schema mismatch, 1 on other errors.
"""

from __future__ import annotations

import argparse
import sys

from .figures import KINDS, FigureSpec, SchemaMismatch, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lavdm-plot", description="render experiment result CSVs to figures"
    )
    parser.add_argument("--kind", choices=KINDS, required=True)
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        metavar="CSV", help="input CSV file(s)")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--field", default="I2", choices=("I2", "Ia", "Im"),
                        help="pointwise field for heatmaps")
    parser.add_argument("--linear-x", action="store_true",
                        help="linear x axis for sweep curves")
    parser.add_argument("--max-arrows", type=int, default=40)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        kind=args.kind,
        inputs=tuple(args.inputs),
        output=args.out,
        field_name=args.field,
        log_x=not args.linear_x,
        max_arrows=args.max_arrows,
    )
    try:
        path = render(spec)
    except SchemaMismatch as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
