"""Command line: simulate, estimate, smooth, experiment.

Exit status: 0 success, 2 usage error, 3 data error, 4 numeric failure,
5 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import experiments, formats, lcm, plummer, smooth
from .naive import NaiveCurve
from .samples import DataError, NumericError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4, 5


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {v}")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def parse_grid(text: str) -> np.ndarray:
    """``"t0:t1:m"`` -> m equally spaced points from t0 to t1 (just t0 if m == 1)."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"grid must look like t0:t1:m, got {text!r}")
    try:
        t0, t1, m = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like t0:t1:m, got {text!r}") from None
    if m < 1:
        raise argparse.ArgumentTypeError("grid is empty (m must be at least 1)")
    if not (math.isfinite(t0) and math.isfinite(t1)):
        raise argparse.ArgumentTypeError("grid ends must be finite")
    if m == 1:
        return np.array([t0])
    if not t1 > t0:
        raise argparse.ArgumentTypeError("grid needs t1 > t0 when m > 1")
    return np.linspace(t0, t1, m)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wicksell", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a Plummer sample")
    p.add_argument("--beta", type=_positive_float, default=200.0)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("pairs", "triples"), default="pairs")

    p = sub.add_parser("estimate", help="naive or isotonic estimate of Psi on a grid")
    p.add_argument("--input", required=True)
    p.add_argument("--mode", choices=("naive", "isotonic"), default="isotonic")
    p.add_argument("--grid", type=parse_grid, required=True, help="t0:t1:m")
    p.add_argument("--out", required=True)
    p.add_argument("--steps-out", help="step-function file (isotonic; default <out>.steps.csv)")

    p = sub.add_parser("smooth", help="kernel-smoothed Psi or Psi' on a grid")
    p.add_argument("--input", required=True)
    p.add_argument("--source", choices=("naive", "isotonic"), default="isotonic")
    p.add_argument("--bandwidth", type=_positive_float, required=True)
    p.add_argument("--derivative", type=int, choices=(0, 1), default=0)
    p.add_argument("--grid", type=parse_grid, required=True, help="t0:t1:m")
    p.add_argument("--out", required=True)

    p = sub.add_parser("experiment", help="run a Monte Carlo experiment from a JSON config")
    p.add_argument("--kind", choices=sorted(experiments.KINDS), required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="report path (figures: output directory)")
    return ap


def _simulate(args) -> None:
    model = plummer.PlummerModel(args.beta)
    obs, raw = plummer.sample(model, args.n, np.random.default_rng(args.seed))
    if args.format == "pairs":
        formats.write_observations(args.out, obs)
    else:
        formats.write_triples(args.out, raw.x1, raw.x2, raw.v3)


def _estimate(args) -> None:
    curve = NaiveCurve(formats.read_observations(args.input))
    if args.mode == "naive":
        formats.write_curve(args.out, args.grid, np.atleast_1d(curve.psi(args.grid)))
        return
    step = lcm.isotonic_psi(lcm.least_concave_majorant(curve))
    formats.write_curve(args.out, args.grid, np.atleast_1d(step(args.grid)))
    steps_out = args.steps_out or os.path.splitext(args.out)[0] + ".steps.csv"
    formats.write_step(steps_out, step)


def _smooth(args) -> None:
    curve = NaiveCurve(formats.read_observations(args.input))
    src = curve if args.source == "naive" else lcm.isotonic_psi(lcm.least_concave_majorant(curve))
    k = smooth.KernelSpec(args.bandwidth)
    fn = smooth.smooth_psi if args.derivative == 0 else smooth.smooth_psi_prime
    formats.write_curve(args.out, args.grid, np.atleast_1d(fn(src, k, args.grid)))


class UsageError(Exception):
    pass


def load_config(path: str) -> experiments.ExperimentConfig:
    if not os.path.isfile(path):
        raise UsageError(f"argument --config: no such file {path!r}")
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise formats.FormatError(exc.msg, exc.lineno, path) from None
    return experiments.ExperimentConfig.from_dict(raw)


def _experiment(args) -> None:
    cfg = load_config(args.config)
    if args.kind == "figures":
        paths = experiments.figure_reproduction(cfg, args.out)
        for key in sorted(paths):
            print(f"{key}: {paths[key]}")
        return
    report = experiments.KINDS[args.kind](cfg).to_dict()
    out = args.out or cfg.output or f"{args.kind}.json"
    formats.write_report(out, report)
    print(out)


COMMANDS = {"simulate": _simulate, "estimate": _estimate, "smooth": _smooth,
            "experiment": _experiment}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"wicksell: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except experiments.ReplicationError as exc:
        cause = exc.__cause__
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC if isinstance(cause, NumericError) else EXIT_DATA
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, lcm.LocalizationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        name = getattr(exc, "filename", None)
        print(f"error: {name + ': ' if name else ''}{exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
