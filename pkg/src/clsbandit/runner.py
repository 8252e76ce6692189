"""Experiment harness: grids, trajectory execution, diagnostics, CSV output.

Randomness discipline: every random draw in a run flows from a numpy
SeedSequence keyed by (stream tag, policy index, grid cell, trial, round),
so any subset of (cell, trial) tasks can run in any order, on any number of
workers, and reproduce the same bytes.  Trials share one environment
realization across policies and cells (the stream keys carry the policy and
cell, the environment key does not), which pairs policy comparisons by seed.

Outputs per run directory:

  trajectory_<policy>_<cell>_<trial>.csv
      t,cum_reward,avg_reward,pseudo_regret,containment,potential_sum
  summary.csv
      policy,lambda,param2,mean_cum_reward,best
  running_avg.csv
      t plus one column per policy: mean over trials of avg_reward at the
      policy's best cell

All CSV output is ASCII with LF newlines; floats carry 17 significant
digits so round-tripping is exact.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import (
    ProblemParams,
    RoundRecord,
    SuperArm,
    TrajectoryLog,
    pseudo_regret,
    regret_decomposition,
)
from .environments import (
    ClusteredEnv,
    ClusteredEnvConfig,
    PromotionEnv,
    PromotionEnvConfig,
    synthetic_promotion_config,
)
from .ingest import read_feature_table, read_reward_table, reward_table_to_dense
from .linalg import BlockRidgeState, BlockShadowState, RidgeState, ShadowState
from .policies import UCB_KINDS, PolicySpec, beta, policy_step

## Stream tags for SeedSequence spawn keys.  Documented contract: changing
## these changes every run's bytes.
TAG_POLICY = 0
TAG_REWARD = 1
TAG_ROUND = 2
TAG_ENV = 3


def stream_rng(base_seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(base_seed, spawn_key=key))


def grid(low: float, high: float, n: int) -> tuple[float, ...]:
    """n geometrically spaced values from low to high, endpoints exact."""
    if low <= 0 or high <= low:
        raise ValueError(f"need 0 < low < high, got low={low}, high={high}")
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    return tuple(float(x) for x in np.geomspace(low, high, n))


DEFAULT_GRID = grid(1e-2, 1e2, 5)


@dataclass
class ExperimentConfig:
    """One experiment: an environment, policies with grids, trials, seeds."""

    environment: str
    policies: tuple[str, ...]
    lambda_grid: tuple[float, ...] = DEFAULT_GRID
    param2_grid: tuple[float, ...] = DEFAULT_GRID
    trials: int = 5
    seed: int = 0
    out_dir: str = "out"
    delta: float = 0.05
    c: float = 1.0
    diagnostics: bool = True
    env_options: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.environment not in (
            "clustered",
            "promotion-synthetic",
            "promotion-ingested",
        ):
            raise ValueError(f"unknown environment {self.environment!r}")
        if not self.policies:
            raise ValueError("at least one policy required")
        if len(set(self.policies)) != len(self.policies):
            raise ValueError("policies must be distinct (file names key on them)")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")

    def cells_for(self, kind: str) -> list[tuple[float, float]]:
        """Grid cells for one policy: (lambda, second parameter) pairs.

        The second parameter is alpha for the UCB kinds and v for the TS
        kinds; greedy has none and sweeps lambda only.
        """
        if kind == "greedy":
            return [(lam, math.nan) for lam in self.lambda_grid]
        return [(lam, p2) for lam in self.lambda_grid for p2 in self.param2_grid]

    def policy_spec(self, kind: str, lam: float, p2: float) -> PolicySpec:
        if kind == "greedy":
            return PolicySpec(kind=kind, lam=lam)
        if kind in UCB_KINDS:
            c = self.c if kind == "pc2ucb" else 0.0
            return PolicySpec(kind=kind, lam=lam, alpha=p2, c=c)
        return PolicySpec(kind=kind, lam=lam, v=p2)


def clustered_preset(**overrides) -> ExperimentConfig:
    """The clustered benchmark: d=11, N=2000, k=100, T=10, 5 trials."""
    options = {
        "d": 11,
        "n_arms": 2000,
        "k": 100,
        "rounds": 10,
        "angle": math.pi / 2,
    }
    options.update(overrides.pop("env_options", {}))
    cfg = dict(
        environment="clustered",
        policies=("greedy", "c2ucb", "pc2ucb", "rwts", "awts"),
        trials=5,
        env_options=options,
    )
    cfg.update(overrides)
    return ExperimentConfig(**cfg)


def promotion_preset(k: int = 100, **overrides) -> ExperimentConfig:
    """The promotion benchmark shape: T=20, M=10, N=100k, k in {50..200}."""
    options = {
        "num_promotions": 10,
        "users_per_round": 100 * k,
        "k": k,
        "rounds": 20,
    }
    options.update(overrides.pop("env_options", {}))
    cfg = dict(
        environment="promotion-ingested",
        policies=("greedy", "c2ucb", "pc2ucb", "rwts", "awts"),
        trials=5,
        env_options=options,
    )
    cfg.update(overrides)
    return ExperimentConfig(**cfg)


def synthetic_promotion_preset(**overrides) -> ExperimentConfig:
    options = {
        "pool_size": 1000,
        "num_promotions": 4,
        "users_per_round": 2000,
        "k": 20,
        "rounds": 20,
        "latent_rank": 3,
        "num_clusters": 10,
        "rated_fraction": 1.0,
    }
    options.update(overrides.pop("env_options", {}))
    cfg = dict(
        environment="promotion-synthetic",
        policies=("c2ucb", "pc2ucb"),
        trials=10,
        env_options=options,
    )
    cfg.update(overrides)
    return ExperimentConfig(**cfg)


## ---------------------------------------------------------------------------
## Config files: a flat key = value format, one key per line, # comments.
## Lists are comma separated.  Keys not named below are environment options.

_TOP_KEYS = {
    "environment": str,
    "trials": int,
    "seed": int,
    "out_dir": str,
    "delta": float,
    "c": float,
    "diagnostics": bool,
}
_LIST_KEYS = {"policies": str, "lambda_grid": float, "param2_grid": float}
_ENV_STR_KEYS = {"features_path", "rewards_path"}


def _coerce_option(key: str, raw: str):
    if key in _ENV_STR_KEYS:
        return raw
    try:
        as_int = int(raw)
        return as_int
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw


def parse_config_text(text: str) -> ExperimentConfig:
    fields: dict = {}
    options: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key in _TOP_KEYS:
            conv = _TOP_KEYS[key]
            fields[key] = raw != "0" if conv is bool else conv(raw)
        elif key in _LIST_KEYS:
            conv = _LIST_KEYS[key]
            fields[key] = tuple(conv(part.strip()) for part in raw.split(","))
        else:
            options[key] = _coerce_option(key, raw)
    if "environment" not in fields:
        raise ValueError("config must set 'environment'")
    if "policies" not in fields:
        raise ValueError("config must set 'policies'")
    return ExperimentConfig(env_options=options, **fields)


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="ascii") as fh:
        return parse_config_text(fh.read())


## ---------------------------------------------------------------------------
## Environment construction, one realization per trial.


def _env_seed(cfg: ExperimentConfig, trial: int) -> int:
    seq = np.random.SeedSequence(cfg.seed, spawn_key=(TAG_ENV, trial))
    return int(seq.generate_state(1)[0])


def build_env(cfg: ExperimentConfig, trial: int):
    opts = cfg.env_options
    seed = _env_seed(cfg, trial)
    if cfg.environment == "clustered":
        return ClusteredEnv(
            ClusteredEnvConfig(
                d=int(opts["d"]),
                N=int(opts["n_arms"]),
                k=int(opts["k"]),
                T=int(opts["rounds"]),
                angle=float(opts["angle"]),
                seed=seed,
                noiseless=bool(opts.get("noiseless", False)),
            )
        )
    if cfg.environment == "promotion-synthetic":
        return PromotionEnv(
            synthetic_promotion_config(
                pool_size=int(opts["pool_size"]),
                num_promotions=int(opts["num_promotions"]),
                N=int(opts["users_per_round"]),
                k=int(opts["k"]),
                T=int(opts["rounds"]),
                seed=seed,
                latent_rank=int(opts.get("latent_rank", 3)),
                num_clusters=int(opts.get("num_clusters", 10)),
                rated_fraction=float(opts.get("rated_fraction", 1.0)),
            )
        )
    features = read_feature_table(opts["features_path"])
    table = read_reward_table(opts["rewards_path"])
    if "num_promotions" in opts:
        num_promotions = int(opts["num_promotions"])
    elif table:
        num_promotions = 1 + max(slot for _, slot in table)
    else:
        raise ValueError("empty rewards table; set num_promotions explicitly")
    dense = reward_table_to_dense(table, features.shape[0], num_promotions)
    return PromotionEnv(
        PromotionEnvConfig(
            user_features=features,
            reward_table=dense,
            N=int(opts["users_per_round"]),
            k=int(opts["k"]),
            T=int(opts["rounds"]),
            seed=seed,
        )
    )


## ---------------------------------------------------------------------------
## Trajectory execution.


def _chosen_geometry(state, ctx, arm: SuperArm):
    """Per-chosen-arm (features, block ids); block id 0 for the dense case."""
    idx = arm.as_array()
    rows = ctx.features[idx % ctx.n_base]
    blocks = idx // ctx.n_base
    return idx, rows, blocks


def _width_sq_sum(state, ctx, rows, blocks) -> float:
    if isinstance(state, BlockRidgeState):
        total = 0.0
        for j in range(state.num_blocks):
            mask = blocks == j
            if np.any(mask):
                total += float(np.sum(state.blocks[j].widths(rows[mask]) ** 2))
        return total
    return float(np.sum(state.widths(rows) ** 2))


def _shadow_width_sq_sum(shadow, ctx, rows, blocks) -> float:
    if isinstance(shadow, BlockShadowState):
        total = 0.0
        for j, block in enumerate(shadow.blocks):
            mask = blocks == j
            if np.any(mask):
                total += float(np.sum(block.widths(rows[mask]) ** 2))
        return total
    return float(np.sum(shadow.widths(rows) ** 2))


def _mean_estimates(state, ctx, rows, blocks) -> np.ndarray:
    if isinstance(state, BlockRidgeState):
        out = np.empty(rows.shape[0])
        thetas = [s.theta_hat() for s in state.blocks]
        for a in range(rows.shape[0]):
            out[a] = rows[a] @ thetas[blocks[a]]
        return out
    return rows @ state.theta_hat()


def _apply_feedback(state, shadow, ctx, rows, blocks, rewards) -> None:
    if isinstance(state, BlockRidgeState):
        for j in range(state.num_blocks):
            mask = blocks == j
            if np.any(mask):
                state.blocks[j].add_batch(rows[mask], rewards[mask])
                if shadow is not None:
                    shadow.blocks[j].add_batch(rows[mask])
    else:
        state.add_batch(rows, rewards)
        if shadow is not None:
            shadow.add_batch(rows)


def run_cell(
    cfg: ExperimentConfig,
    env,
    spec: PolicySpec,
    policy_idx: int,
    cell_idx: int,
    trial: int,
    store_all_scores: bool = False,
) -> TrajectoryLog:
    """Execute one trajectory: T rounds of one policy at one grid cell."""
    T = int(cfg.env_options["rounds"])
    params = env.params(cfg.delta)
    block_env = isinstance(env, PromotionEnv)
    if block_env:
        d_base = env.cfg.base_dim
        M = env.cfg.num_promotions
        state = BlockRidgeState(d_base, M, spec.lam)
        shadow = (
            BlockShadowState(d_base, M, spec.lam, params.k)
            if cfg.diagnostics
            else None
        )
    else:
        state = RidgeState(params.d, spec.lam)
        shadow = ShadowState(params.d, spec.lam, params.k) if cfg.diagnostics else None
    theta_star = env.ground_truth.theta_star
    log = TrajectoryLog()
    for t in range(1, T + 1):
        round_rng = stream_rng(cfg.seed, TAG_ROUND, trial, t)
        ctx = env.round(t, round_rng)
        estimator_distance = None
        radius = None
        if theta_star is not None and not block_env:
            estimator_distance = state.mahalanobis(state.theta_hat() - theta_star)
            radius = beta(t, cfg.delta, params, spec.lam)
        policy_rng = stream_rng(cfg.seed, TAG_POLICY, policy_idx, cell_idx, trial, t)
        arm, scores = policy_step(spec, ctx, state, t, policy_rng, params)
        reward_rng = stream_rng(cfg.seed, TAG_REWARD, policy_idx, cell_idx, trial, t)
        rewards = env.rewards(ctx, arm, reward_rng)
        idx, rows, blocks = _chosen_geometry(state, ctx, arm)
        record = RoundRecord(
            t=t,
            arm=arm,
            scores=scores[idx],
            rewards=np.asarray(rewards, dtype=np.float64),
            mean_estimates=_mean_estimates(state, ctx, rows, blocks),
            width_sq_sum=_width_sq_sum(state, ctx, rows, blocks),
            shadow_width_sq_sum=(
                _shadow_width_sq_sum(shadow, ctx, rows, blocks)
                if shadow is not None
                else None
            ),
            true_means=env.true_means(ctx)[idx],
            optimal_value=env.optimal_value(ctx),
            estimator_distance=estimator_distance,
            confidence_radius=radius,
            all_scores=scores.copy() if store_all_scores else None,
        )
        _apply_feedback(state, shadow, ctx, rows, blocks, np.asarray(rewards))
        log.append(record)
    return log


## ---------------------------------------------------------------------------
## Diagnostics over completed trajectories.


@dataclass
class DiagnosticsRecord:
    """Derived per-trajectory diagnostics."""

    potential_sum: float
    shadow_potential_sum: float | None
    containment: list[bool] | None
    pseudo_regret: float
    r_opt: float
    r_alg: float
    r_est: float

    @property
    def containment_all(self) -> bool | None:
        if self.containment is None:
            return None
        return all(self.containment)


def diagnostics(log: TrajectoryLog) -> DiagnosticsRecord:
    potential = sum(rec.width_sq_sum for rec in log.records)
    shadow_vals = [rec.shadow_width_sq_sum for rec in log.records]
    shadow = None if any(v is None for v in shadow_vals) else float(sum(shadow_vals))
    contain = None
    if all(rec.estimator_distance is not None for rec in log.records):
        contain = [
            rec.estimator_distance <= rec.confidence_radius for rec in log.records
        ]
    r_opt, r_alg, r_est = regret_decomposition(log)
    return DiagnosticsRecord(
        potential_sum=float(potential),
        shadow_potential_sum=shadow,
        containment=contain,
        pseudo_regret=pseudo_regret(log),
        r_opt=r_opt,
        r_alg=r_alg,
        r_est=r_est,
    )


@dataclass
class PotentialCheck:
    """Both elliptical potential bounds evaluated on one trajectory.

    The full-statistic bound 2 d ln(1 + kT/d) is asserted for lam >= k; the
    shadow bound (2 k d / lam) ln(1 + kT/d) is asserted for every lam > 0.
    Outside its regime the full bound is reported but not required.
    """

    full_value: float
    full_bound: float
    full_required: bool
    shadow_value: float | None
    shadow_bound: float
    violated: bool


def check_potential_bounds(
    log: TrajectoryLog, params: ProblemParams, lam: float
) -> PotentialCheck:
    diag = diagnostics(log)
    T = len(log)
    log_term = math.log(1.0 + params.k * T / params.d)
    full_bound = 2.0 * params.d * log_term
    shadow_bound = (2.0 * params.k * params.d / lam) * log_term
    full_required = lam >= params.k
    violated = False
    if full_required and diag.potential_sum > full_bound:
        violated = True
    if diag.shadow_potential_sum is not None and (
        diag.shadow_potential_sum > shadow_bound
    ):
        violated = True
    return PotentialCheck(
        full_value=diag.potential_sum,
        full_bound=full_bound,
        full_required=full_required,
        shadow_value=diag.shadow_potential_sum,
        shadow_bound=shadow_bound,
        violated=violated,
    )


@dataclass
class EnvelopeReport:
    """Finite-horizon pseudo-regret envelope for the UCB kinds.

    envelope = r_est_bound + r_alg_bound, where both bounds hinge on the
    round-T confidence radius and the potential sum bound: on the
    containment event, r_opt <= 0, r_est <= radius * potential_root, and
    r_alg <= (1 + c) * radius * potential_root.
    """

    radius: float
    potential_root: float
    r_est_bound: float
    r_alg_bound: float
    envelope: float
    fraction_within: float
    expected_fraction: float


def check_regret_envelope(
    logs: list[TrajectoryLog],
    params: ProblemParams,
    lam: float,
    delta: float,
    kind: str,
    c: float = 0.0,
) -> EnvelopeReport | None:
    """Fraction of trajectories whose pseudo-regret sits under the envelope.

    Only the UCB kinds run with the schedule the envelope is built from; for
    other kinds this warns and returns None.
    """
    if kind not in UCB_KINDS:
        warnings.warn(
            f"regret envelope applies to {UCB_KINDS}, not {kind!r}", RuntimeWarning
        )
        return None
    T = params.T
    log_term = math.log(1.0 + params.k * T / params.d)
    if lam >= params.k:
        potential_root = math.sqrt(2.0 * params.d * params.k * T * log_term)
    else:
        potential_root = math.sqrt(
            2.0 * params.d * params.k**2 * T * log_term / lam
        )
    radius = beta(T, delta, params, lam)
    r_est_bound = radius * potential_root
    r_alg_bound = (1.0 + c) * radius * potential_root
    envelope = r_est_bound + r_alg_bound
    within = sum(1 for log in logs if pseudo_regret(log) <= envelope)
    return EnvelopeReport(
        radius=radius,
        potential_root=potential_root,
        r_est_bound=r_est_bound,
        r_alg_bound=r_alg_bound,
        envelope=envelope,
        fraction_within=within / len(logs),
        expected_fraction=1.0 - delta,
    )


## ---------------------------------------------------------------------------
## CSV emission.  ASCII, LF, 17 significant digits.


def _fmt(x) -> str:
    if x is None:
        return "nan"
    value = float(x)
    if math.isnan(value):
        return "nan"
    return format(value, ".17g")


def trajectory_csv_name(policy: str, cell_idx: int, trial: int) -> str:
    return f"trajectory_{policy}_{cell_idx}_{trial}.csv"


def write_trajectory_csv(path: str, log: TrajectoryLog) -> None:
    lines = ["t,cum_reward,avg_reward,pseudo_regret,containment,potential_sum"]
    regret = 0.0
    potential = 0.0
    for i, rec in enumerate(log.records):
        cum = log.cum_rewards[i]
        if rec.optimal_value is not None and rec.true_means is not None:
            regret += rec.optimal_value - float(np.sum(rec.true_means))
            regret_str = _fmt(regret)
        else:
            regret_str = "nan"
        potential += rec.width_sq_sum
        if rec.estimator_distance is not None:
            flag = "1" if rec.estimator_distance <= rec.confidence_radius else "0"
        else:
            flag = "nan"
        lines.append(
            ",".join(
                [
                    str(rec.t),
                    _fmt(cum),
                    _fmt(cum / rec.t),
                    regret_str,
                    flag,
                    _fmt(potential),
                ]
            )
        )
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass
class PolicySummary:
    kind: str
    cells: list[tuple[float, float]]
    cell_means: np.ndarray
    best_cell: int
    per_trial_best: np.ndarray
    running_avg: np.ndarray

    @property
    def best_mean(self) -> float:
        return float(self.cell_means[self.best_cell])


@dataclass
class Summary:
    policies: dict[str, PolicySummary]


def run_experiment(
    cfg: ExperimentConfig, threads: int = 1
) -> dict[tuple[str, int, int], TrajectoryLog]:
    """Run every (policy, cell, trial) trajectory and write trajectory CSVs."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    envs = [build_env(cfg, trial) for trial in range(cfg.trials)]
    tasks = []
    for policy_idx, kind in enumerate(cfg.policies):
        for cell_idx, (lam, p2) in enumerate(cfg.cells_for(kind)):
            spec = cfg.policy_spec(kind, lam, p2)
            for trial in range(cfg.trials):
                tasks.append((kind, policy_idx, cell_idx, trial, spec))

    def execute(task):
        kind, policy_idx, cell_idx, trial, spec = task
        log = run_cell(cfg, envs[trial], spec, policy_idx, cell_idx, trial)
        return (kind, cell_idx, trial), log

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = dict(pool.map(execute, tasks))
    else:
        results = dict(execute(task) for task in tasks)
    for (kind, cell_idx, trial), log in sorted(results.items()):
        path = os.path.join(cfg.out_dir, trajectory_csv_name(kind, cell_idx, trial))
        write_trajectory_csv(path, log)
    return results


def tune_and_summarize(
    cfg: ExperimentConfig, results: dict[tuple[str, int, int], TrajectoryLog]
) -> Summary:
    """Pick each policy's best grid cell by mean cumulative reward.

    Writes summary.csv (every cell, best flagged) and running_avg.csv (mean
    running average reward at each policy's best cell).
    """
    T = int(cfg.env_options["rounds"])
    summaries: dict[str, PolicySummary] = {}
    summary_lines = ["policy,lambda,param2,mean_cum_reward,best"]
    for kind in cfg.policies:
        cells = cfg.cells_for(kind)
        means = np.empty(len(cells))
        finals = np.empty((len(cells), cfg.trials))
        averages = np.empty((len(cells), cfg.trials, T))
        for cell_idx in range(len(cells)):
            for trial in range(cfg.trials):
                log = results[(kind, cell_idx, trial)]
                finals[cell_idx, trial] = log.cumulative_reward()
                averages[cell_idx, trial] = [
                    log.cum_rewards[i] / (i + 1) for i in range(T)
                ]
            means[cell_idx] = finals[cell_idx].mean()
        best = int(np.argmax(means))
        summaries[kind] = PolicySummary(
            kind=kind,
            cells=cells,
            cell_means=means,
            best_cell=best,
            per_trial_best=finals[best].copy(),
            running_avg=averages[best].mean(axis=0),
        )
        for cell_idx, (lam, p2) in enumerate(cells):
            summary_lines.append(
                ",".join(
                    [
                        kind,
                        _fmt(lam),
                        _fmt(p2),
                        _fmt(means[cell_idx]),
                        "1" if cell_idx == best else "0",
                    ]
                )
            )
    with open(
        os.path.join(cfg.out_dir, "summary.csv"), "w", encoding="ascii", newline="\n"
    ) as fh:
        fh.write("\n".join(summary_lines) + "\n")
    avg_lines = ["t," + ",".join(cfg.policies)]
    for t in range(T):
        row = [str(t + 1)]
        row.extend(_fmt(summaries[kind].running_avg[t]) for kind in cfg.policies)
        avg_lines.append(",".join(row))
    with open(
        os.path.join(cfg.out_dir, "running_avg.csv"),
        "w",
        encoding="ascii",
        newline="\n",
    ) as fh:
        fh.write("\n".join(avg_lines) + "\n")
    return Summary(policies=summaries)


def run_and_summarize(cfg: ExperimentConfig, threads: int = 1) -> Summary:
    return tune_and_summarize(cfg, run_experiment(cfg, threads=threads))
