"""Command-line entry point.

Usage: selectrand <experiment> --config <path> --seed <u64> --out <dir>

Writes <experiment>.csv (deterministic given the seed), an SVG figure for
experiments that define one (rendered purely from the CSV), and
run_meta.json. Exit codes: 0 success, 2 configuration error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    InvalidInputError,
    SelectRandError,
    UnsupportedOperationError,
)
from .experiments import HAS_FIGURE, REGISTRY, ROW_FIELDS

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def parse_config(path):
    """Flat key=value config file; '#' starts a comment; values stay strings."""
    overrides = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise InvalidInputError(f"{path}:{lineno}: empty key")
        overrides[key] = value
    return overrides


def format_value(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return "%.17g" % float(v)


def write_csv(rows, path):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(ROW_FIELDS) + "\n")
        for rep, arm, metric, x, value in rows:
            rep_s = "" if rep is None else str(int(rep))
            fh.write(f"{rep_s},{arm},{metric},{format_value(x)},"
                     f"{format_value(value)}\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def build_parser():
    parser = argparse.ArgumentParser(
        prog="selectrand",
        description="Run a randomized selective inference experiment.")
    parser.add_argument("experiment", choices=sorted(REGISTRY))
    parser.add_argument("--config", default=None,
                        help="flat key=value configuration file")
    parser.add_argument("--seed", type=int, default=0,
                        help="unsigned 64-bit master seed")
    parser.add_argument("--out", default=".",
                        help="output directory (created if missing)")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    if not (0 <= args.seed < 2 ** 64):
        print("error: --seed must fit in an unsigned 64-bit integer",
              file=sys.stderr)
        return EXIT_CONFIG

    try:
        overrides = parse_config(args.config) if args.config else {}
    except (OSError, InvalidInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    run, default_reps = REGISTRY[args.experiment]
    try:
        reps = int(overrides.pop("reps", default_reps))
    except ValueError:
        print("error: reps must be an integer", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        rows, meta = run(overrides, args.seed, reps=reps)
    except (InvalidInputError, UnsupportedOperationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SelectRandError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    csv_path = out_dir / f"{args.experiment}.csv"
    write_csv(rows, csv_path)

    figure_path = None
    if args.experiment in HAS_FIGURE:
        from . import plots
        figure_path = out_dir / f"{args.experiment}.svg"
        plots.render(args.experiment, csv_path, figure_path)

    import scipy

    meta_out = {
        "experiment": args.experiment,
        "seed": args.seed,
        "reps": reps,
        "config": overrides,
        "outputs": {
            "csv": csv_path.name,
            "figure": figure_path.name if figure_path else None,
        },
        "versions": {
            "selectrand": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "summary": _jsonable(meta),
    }
    with open(out_dir / "run_meta.json", "w") as fh:
        json.dump(meta_out, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
