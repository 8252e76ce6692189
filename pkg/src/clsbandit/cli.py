"""Command line entry points: run, ingest, diagnose."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import ingest as ingest_mod
from . import runner


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = runner.load_config(args.config)
    if args.out is not None:
        cfg.out_dir = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    summary = runner.run_and_summarize(cfg, threads=args.threads)
    for kind, ps in summary.policies.items():
        lam, p2 = ps.cells[ps.best_cell]
        print(
            f"{kind}: best cell lambda={lam:g} param2={p2:g} "
            f"mean_cum_reward={ps.best_mean:.6g}"
        )
    print(f"wrote {cfg.out_dir}/summary.csv")
    return 0


def _cmd_ingest(args: argparse.Namespace) -> int:
    ds = ingest_mod.parse_ratings(args.ratings)
    rng = np.random.default_rng(np.random.SeedSequence(args.seed))
    features, table, report = ingest_mod.ingest_pipeline(
        ds,
        num_test_movies=args.num_movies,
        min_raters=args.min_raters,
        max_raters=args.max_raters,
        rank=args.rank,
        iters=args.iters,
        rng=rng,
    )
    ingest_mod.write_feature_table(args.out_features, features)
    ingest_mod.write_reward_table(args.out_rewards, table)
    print(f"users: {features.shape[0]}, feature dim: {features.shape[1]}")
    print(f"test movies: {report.test_movies}")
    print(f"rater counts: {report.test_movie_rater_counts}")
    print(f"explained energy: {report.explained_energy:.4f}")
    return 0


def _cmd_diagnose(args: argparse.Namespace) -> int:
    """Re-run the potential-bound and containment checks on stored CSVs."""
    cfg = runner.load_config(args.config)
    if args.out is not None:
        cfg.out_dir = args.out
    env = runner.build_env(cfg, 0)
    params = env.params(cfg.delta)
    T = int(cfg.env_options["rounds"])
    log_term = np.log(1.0 + params.k * T / params.d)
    full_bound = 2.0 * params.d * log_term
    failures = 0
    checked = 0
    for policy_idx, kind in enumerate(cfg.policies):
        cells = cfg.cells_for(kind)
        for cell_idx, (lam, _p2) in enumerate(cells):
            for trial in range(cfg.trials):
                name = runner.trajectory_csv_name(kind, cell_idx, trial)
                path = os.path.join(cfg.out_dir, name)
                if not os.path.exists(path):
                    continue
                checked += 1
                rows = _read_trajectory(path)
                potential = rows["potential_sum"][-1]
                ok = True
                if lam >= params.k and potential > full_bound:
                    ok = False
                contained = rows["containment"]
                frac = (
                    float(np.mean(contained[~np.isnan(contained)]))
                    if np.any(~np.isnan(contained))
                    else float("nan")
                )
                status = "ok" if ok else "POTENTIAL BOUND VIOLATED"
                print(
                    f"{name}: potential={potential:.6g} bound={full_bound:.6g} "
                    f"containment={frac:.3f} {status}"
                )
                if not ok:
                    failures += 1
    print(f"checked {checked} trajectories, {failures} violations")
    return 1 if failures else 0


def _read_trajectory(path: str) -> dict[str, np.ndarray]:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return {name: data[:, i] for i, name in enumerate(header)}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="clsbandit",
        description="Combinatorial linear semi-bandit experiment harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None, help="override the config out_dir")
    p_run.add_argument("--seed", type=int, default=None, help="override the seed")
    p_run.add_argument("--threads", type=int, default=1)
    p_run.set_defaults(func=_cmd_run)

    p_ing = sub.add_parser("ingest", help="build feature and reward tables")
    p_ing.add_argument("--ratings", required=True)
    p_ing.add_argument("--out-features", required=True)
    p_ing.add_argument("--out-rewards", required=True)
    p_ing.add_argument("--num-movies", type=int, default=10)
    p_ing.add_argument("--min-raters", type=int, default=1400)
    p_ing.add_argument("--max-raters", type=int, default=2800)
    p_ing.add_argument("--rank", type=int, default=50)
    p_ing.add_argument("--iters", type=int, default=4)
    p_ing.add_argument("--seed", type=int, default=0)
    p_ing.set_defaults(func=_cmd_ingest)

    p_diag = sub.add_parser("diagnose", help="re-check stored trajectory CSVs")
    p_diag.add_argument("--config", required=True)
    p_diag.add_argument("--out", default=None, help="directory holding the CSVs")
    p_diag.set_defaults(func=_cmd_diagnose)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
