"""Synthetic and data-driven environments.

Two families:

  clustered    N arms partitioned into d-1 equal clusters; all arms in a
               cluster share one feature vector, and the angle between any
               two cluster vectors is controlled by a single parameter, so
               cluster overlap is tunable from aligned to orthogonal.
               Rewards are +/-1 coin flips with mean theta* . x.

  promotion    each round samples N users (with replacement) from a fixed
               pool; an arm pairs a sampled user with one of M promotions
               under a block-structured parameter space.  Rewards are
               deterministic table lookups in [0, 5] (0 for unrated).

Ground truth is explicit in both, so pseudo-regret and containment
diagnostics are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    GroundTruthMissingError,
    ProblemParams,
    PromotionAssignment,
    RoundContext,
    SuperArm,
    TopK,
)
from .oracles import promotion_select, top_k_select

## Reward range half-lengths: +/-1 coin flips, and ratings in [0, 5].
CLUSTERED_NOISE_SCALE = 1.0
PROMOTION_NOISE_SCALE = 2.5


@dataclass(frozen=True)
class GroundTruth:
    """Whatever fixes the expected reward of every arm.

    Exactly one of the two fields is set: theta_star for feature-linear
    environments, reward_table (pool_size x M) for table-driven ones.
    """

    theta_star: np.ndarray | None = None
    reward_table: np.ndarray | None = None


@dataclass(frozen=True)
class ClusteredEnvConfig:
    d: int
    N: int
    k: int
    T: int
    angle: float
    seed: int
    noiseless: bool = False

    def __post_init__(self) -> None:
        if self.d < 2:
            raise ValueError(f"d must be >= 2, got {self.d}")
        if not 0.0 <= self.angle <= math.pi / 2:
            raise ValueError(f"angle must lie in [0, pi/2], got {self.angle}")
        if self.N < self.d - 1:
            raise ValueError(f"need at least one arm per cluster, got N={self.N}")
        if not 1 <= self.k <= self.N:
            raise ValueError(f"k must lie in [1, N], got {self.k}")
        if self.T < 1:
            raise ValueError(f"T must be >= 1, got {self.T}")

    @property
    def num_clusters(self) -> int:
        return self.d - 1


def clustered_features(cfg: ClusteredEnvConfig, cluster_id: int) -> np.ndarray:
    """Feature vector shared by cluster `cluster_id` (1-based, up to d-1).

    Entry 0 carries cos(angle), entry cluster_id carries sin(angle); the
    common first entry is what makes distinct clusters overlap.
    """
    if not 1 <= cluster_id <= cfg.num_clusters:
        raise ValueError(
            f"cluster_id must lie in [1, {cfg.num_clusters}], got {cluster_id}"
        )
    x = np.zeros(cfg.d)
    x[0] = math.cos(cfg.angle)
    x[cluster_id] = math.sin(cfg.angle)
    return x


def cluster_of_arm(cfg: ClusteredEnvConfig, arm: int) -> int:
    """Contiguous balanced blocks: arms 0..N-1 split into d-1 runs."""
    return 1 + (arm * cfg.num_clusters) // cfg.N


def _sample_unit_sphere(d: int, rng: np.random.Generator) -> np.ndarray:
    while True:
        z = rng.standard_normal(d)
        norm = np.linalg.norm(z)
        if norm > 1e-12:
            return z / norm


class ClusteredEnv:
    """Fixed arm set; the same RoundContext every round."""

    def __init__(self, cfg: ClusteredEnvConfig) -> None:
        self.cfg = cfg
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
        self.ground_truth = GroundTruth(theta_star=_sample_unit_sphere(cfg.d, rng))
        clusters = np.array([cluster_of_arm(cfg, i) for i in range(cfg.N)])
        feats = np.stack(
            [clustered_features(cfg, j) for j in range(1, cfg.num_clusters + 1)]
        )
        self._features = feats[clusters - 1]
        self._ctx = RoundContext(t=1, features=self._features, constraint=TopK(cfg.k))
        self._true_means = self._features @ self.ground_truth.theta_star
        self._optimal = top_k_select(self._true_means, cfg.k).objective

    def params(self, delta: float) -> ProblemParams:
        cfg = self.cfg
        return ProblemParams(
            d=cfg.d,
            N=cfg.N,
            k=cfg.k,
            T=cfg.T,
            R=CLUSTERED_NOISE_SCALE,
            S=1.0,
            delta=delta,
        )

    def round(self, t: int, rng: np.random.Generator | None = None) -> RoundContext:
        return self._ctx.with_round(t)

    def true_means(self, ctx: RoundContext) -> np.ndarray:
        return self._true_means

    def optimal_value(self, ctx: RoundContext) -> float:
        return self._optimal

    def rewards(
        self, ctx: RoundContext, arm: SuperArm, rng: np.random.Generator
    ) -> np.ndarray:
        means = self._true_means[arm.as_array()]
        if self.cfg.noiseless:
            return means.copy()
        p = (1.0 + means) / 2.0
        return np.where(rng.random(means.shape[0]) < p, 1.0, -1.0)


def clustered_round(cfg: ClusteredEnvConfig, env: ClusteredEnv, t: int) -> RoundContext:
    return env.round(t)


def clustered_reward(
    cfg: ClusteredEnvConfig,
    gt: GroundTruth,
    x: np.ndarray,
    rng: np.random.Generator,
) -> float:
    """+1 with probability (1 + theta* . x) / 2, else -1."""
    mean = float(gt.theta_star @ x)
    if cfg.noiseless:
        return mean
    return 1.0 if rng.random() < (1.0 + mean) / 2.0 else -1.0


@dataclass(frozen=True)
class PromotionEnvConfig:
    """Promotion assignment over a fixed user pool.

    user_features    (pool_size, d) array, every row norm at most 1
    reward_table     (pool_size, M) array of realized ratings (0 = unrated)
    N                users sampled per round (with replacement; duplicates
                     stay distinct arms)
    """

    user_features: np.ndarray
    reward_table: np.ndarray
    N: int
    k: int
    T: int
    seed: int

    def __post_init__(self) -> None:
        if self.user_features.ndim != 2:
            raise ValueError("user_features must be 2-d")
        if self.reward_table.ndim != 2:
            raise ValueError("reward_table must be 2-d")
        if self.user_features.shape[0] != self.reward_table.shape[0]:
            raise ValueError("user_features and reward_table must agree on pool size")
        if not 1 <= self.k <= self.N:
            raise ValueError(f"k must lie in [1, N], got {self.k}")
        if self.T < 1:
            raise ValueError(f"T must be >= 1, got {self.T}")

    @property
    def pool_size(self) -> int:
        return self.user_features.shape[0]

    @property
    def num_promotions(self) -> int:
        return self.reward_table.shape[1]

    @property
    def base_dim(self) -> int:
        return self.user_features.shape[1]


class PromotionEnv:
    """Block-structured rounds over a sampled user subset."""

    def __init__(self, cfg: PromotionEnvConfig) -> None:
        self.cfg = cfg
        self.ground_truth = GroundTruth(reward_table=cfg.reward_table)

    def params(self, delta: float) -> ProblemParams:
        cfg = self.cfg
        return ProblemParams(
            d=cfg.base_dim * cfg.num_promotions,
            N=cfg.N * cfg.num_promotions,
            k=cfg.k,
            T=cfg.T,
            R=PROMOTION_NOISE_SCALE,
            S=1.0,
            delta=delta,
        )

    def round(self, t: int, rng: np.random.Generator) -> RoundContext:
        return promotion_round(self.cfg, self, t, rng)

    def true_means(self, ctx: RoundContext) -> np.ndarray:
        return true_arm_means(ctx, self.ground_truth)

    def optimal_value(self, ctx: RoundContext) -> float:
        return optimal_value(ctx, self.ground_truth)

    def rewards(
        self, ctx: RoundContext, arm: SuperArm, rng: np.random.Generator
    ) -> np.ndarray:
        return self.true_means(ctx)[arm.as_array()].copy()


def promotion_round(
    cfg: PromotionEnvConfig,
    env: PromotionEnv,
    t: int,
    rng: np.random.Generator,
) -> RoundContext:
    """Sample N pool users with replacement and expose N * M conceptual arms."""
    users = rng.integers(0, cfg.pool_size, size=cfg.N)
    return RoundContext(
        t=t,
        features=cfg.user_features[users],
        constraint=PromotionAssignment(
            num_users=cfg.N, num_promotions=cfg.num_promotions, k=cfg.k
        ),
        blocks=cfg.num_promotions,
        user_ids=users,
    )


def promotion_reward(cfg: PromotionEnvConfig, user: int, promotion: int) -> float:
    """Deterministic rating lookup; 0 stands for unrated."""
    return float(cfg.reward_table[user, promotion])


def true_arm_means(ctx: RoundContext, gt: GroundTruth) -> np.ndarray:
    """Expected reward of every conceptual arm in the context, arm order."""
    if gt.theta_star is not None:
        if ctx.blocks != 1:
            raise GroundTruthMissingError(
                "theta_star ground truth does not cover block-structured rounds"
            )
        return ctx.features @ gt.theta_star
    if gt.reward_table is not None:
        if ctx.user_ids is None:
            raise GroundTruthMissingError("context lacks the sampled user ids")
        # arm j * N + i -> table[user_ids[i], j]
        return gt.reward_table[ctx.user_ids, :].T.reshape(-1)
    raise GroundTruthMissingError("ground truth carries neither field")


def optimal_value(ctx: RoundContext, gt: GroundTruth) -> float:
    """Value of the best feasible super arm under the true expected rewards."""
    constraint = ctx.constraint
    if isinstance(constraint, TopK) and constraint.k == 0:
        return 0.0
    means = true_arm_means(ctx, gt)
    if isinstance(constraint, TopK):
        return top_k_select(means, constraint.k).objective
    return promotion_select(
        means, constraint.num_users, constraint.num_promotions, constraint.k
    ).objective


## ---------------------------------------------------------------------------
## Synthetic promotion instances: a clustered user pool with planted low-rank
## ratings, quantized to the half-step grid real ratings live on.


def synthetic_promotion_config(
    pool_size: int,
    num_promotions: int,
    N: int,
    k: int,
    T: int,
    seed: int,
    latent_rank: int = 3,
    num_clusters: int = 10,
    rated_fraction: float = 1.0,
) -> PromotionEnvConfig:
    """Plant a low-rank user-by-promotion rating structure.

    Users sit near one of `num_clusters` latent centers; ratings follow the
    center affinities, quantized to {0.5, 1.0, ..., 5.0}, with a
    (1 - rated_fraction) share zeroed out as unrated.  User features carry
    the latent coordinates plus a constant, globally scaled so the largest
    norm is 1, mirroring what the ingest pipeline produces.
    """
    if not 0.0 < rated_fraction <= 1.0:
        raise ValueError(f"rated_fraction must lie in (0, 1], got {rated_fraction}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    centers = rng.standard_normal((num_clusters, latent_rank))
    assignment = np.arange(pool_size) % num_clusters
    latent = centers[assignment] + 0.05 * rng.standard_normal((pool_size, latent_rank))
    affinity = latent @ rng.standard_normal((latent_rank, num_promotions))
    z = (affinity - affinity.mean()) / max(affinity.std(), 1e-12)
    ratings = np.clip(np.round(2.0 * (2.75 + 0.75 * z)) / 2.0, 0.5, 5.0)
    if rated_fraction < 1.0:
        ratings[rng.random(ratings.shape) >= rated_fraction] = 0.0
    features = np.hstack([latent, np.ones((pool_size, 1))])
    norms = np.linalg.norm(features, axis=1)
    features /= norms.max()
    while np.linalg.norm(features, axis=1).max() > 1.0:
        features /= np.linalg.norm(features, axis=1).max()
    return PromotionEnvConfig(
        user_features=features,
        reward_table=ratings,
        N=N,
        k=k,
        T=T,
        seed=seed,
    )
