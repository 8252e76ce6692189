"""Command line front end: one subcommand per figure."""

from __future__ import annotations

import argparse
import sys

from .figures import PlotSpec, plot_angle_sweep, plot_avg_reward, plot_cosine_hist


def _parse_labels(pairs: list[str]) -> dict[str, str]:
    labels = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise SystemExit(f"bad label {pair!r}, expected policy=Label")
        labels[key] = value
    return labels


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clsplots", description="Figures from bandit harness output files."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    avg = sub.add_parser("avg-reward", help="average reward per round, per policy")
    avg.add_argument("--glob", required=True, help="trajectory CSV glob")
    avg.add_argument("--out", required=True, help="output figure path")
    avg.add_argument(
        "--label", action="append", default=[], help="policy=Label, repeatable"
    )

    cos = sub.add_parser("cosine-hist", help="pairwise feature similarity histogram")
    cos.add_argument("--features", required=True, help="binary feature table path")
    cos.add_argument("--out", required=True, help="output figure path")
    cos.add_argument("--sample-size", type=int, default=100_000)
    cos.add_argument("--bins", type=int, default=50)
    cos.add_argument("--seed", type=int, default=0)

    sweep = sub.add_parser("angle-sweep", help="tuned reward across a sweep")
    sweep.add_argument("--glob", required=True, help="summary CSV glob")
    sweep.add_argument("--out", required=True, help="output figure path")
    sweep.add_argument(
        "--label", action="append", default=[], help="policy=Label, repeatable"
    )

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "avg-reward":
        spec = PlotSpec(args.glob, "avg_reward", args.out, _parse_labels(args.label))
        out, _ = plot_avg_reward(spec)
    elif args.command == "cosine-hist":
        out, _ = plot_cosine_hist(
            args.features, args.sample_size, args.out, bins=args.bins, seed=args.seed
        )
    else:
        spec = PlotSpec(args.glob, "angle_sweep", args.out, _parse_labels(args.label))
        out, _ = plot_angle_sweep(spec)
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
