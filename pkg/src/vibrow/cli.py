"""Command-line driver: `vibro-w run <config.json>` and `vibro-w peaks <data.csv>`.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .dynamics import NumericsError
from .experiments import ConfigError, RunConfig, _find_peaks_xy, run

EXIT_CONFIG = 2
EXIT_NUMERICS = 3


def _parse_override(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise ConfigError(f"override must look like key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def _cmd_run(args) -> int:
    cfg = RunConfig.from_json(args.config)
    data = cfg.__dict__.copy()
    if args.seed is not None:
        data["seed"] = args.seed
    if args.n_max is not None:
        data["n_max"] = args.n_max
    if args.traj is not None:
        data["n_traj"] = args.traj
    for text in args.override or []:
        key, value = _parse_override(text)
        data[key] = value
    cfg = RunConfig.from_dict(data)
    written = run(cfg, out_dir=args.out)
    for path in written:
        print(path)
    return 0


def _cmd_peaks(args) -> int:
    try:
        with open(args.data, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [[float(v) for v in row] for row in reader if row]
    except (OSError, StopIteration, ValueError) as exc:
        raise ConfigError(f"cannot read CSV {args.data}: {exc}") from exc
    if args.column not in header:
        raise ConfigError(f"column {args.column!r} not in CSV header {header}")
    if "beta" not in header:
        raise ConfigError(f"CSV {args.data} has no beta column")
    table = np.array(rows, dtype=float)
    beta = table[:, header.index("beta")]
    values = table[:, header.index(args.column)]
    peaks = _find_peaks_xy(beta, values, args.prominence)
    print("beta,height")
    for b, h in peaks:
        print(f"{b:.6g},{h:.6g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vibro-w", description="W-state formation simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a run configuration")
    p_run.add_argument("config", help="path to the run config JSON")
    p_run.add_argument("--out", default=None, help="output directory (overrides config out_dir)")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--n-max", type=int, default=None, dest="n_max")
    p_run.add_argument("--traj", type=int, default=None, help="MCWF trajectory count")
    p_run.add_argument("--override", action="append", metavar="KEY=VALUE", help="override any config field")
    p_run.set_defaults(func=_cmd_run)

    p_peaks = sub.add_parser("peaks", help="detect peaks in a data CSV column")
    p_peaks.add_argument("data", help="path to a beta-series data CSV")
    p_peaks.add_argument("--column", required=True)
    p_peaks.add_argument("--prominence", type=float, default=None)
    p_peaks.set_defaults(func=_cmd_peaks)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICS


if __name__ == "__main__":
    sys.exit(main())
