"""`plot-figures --fig {2,3,4,5} --data <csv...> --out <png>`."""

from __future__ import annotations

import argparse
import sys

from .render import FigureSpec, RenderError, render_to_file


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plot-figures", description="Render figures from vibro-w CSVs")
    parser.add_argument("--fig", type=int, required=True, choices=(2, 3, 4, 5))
    parser.add_argument("--data", nargs="+", required=True, help="input data CSV path(s)")
    parser.add_argument("--out", required=True, help="output raster image path")
    parser.add_argument("--beta-min", type=float, default=None)
    parser.add_argument("--beta-max", type=float, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        figure_id=args.fig,
        csv_paths=tuple(args.data),
        out_path=args.out,
        beta_min=args.beta_min,
        beta_max=args.beta_max,
    )
    try:
        out = render_to_file(spec)
    except RenderError as exc:
        print(f"plot error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
