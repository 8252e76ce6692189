"""Shared domain types for combinatorial linear semi-bandit experiments.

A problem instance presents N arms per round, each carrying a feature vector
with Euclidean norm at most 1.  A policy picks a feasible super arm (a set of
at most k arm indices) and observes one reward per chosen arm.  The types
here carry rounds, choices, and logged trajectories; they hold no policy or
environment logic.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

## Feature norms may exceed 1 by float slack only; anything larger is a bug
## in the caller, not something to clip silently.
NORM_SLACK = 1e-12


class GroundTruthMissingError(RuntimeError):
    """Raised when a regret quantity needs ground truth the log does not have."""


def _check_positive_int(name: str, value: int) -> None:
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")


@dataclass(frozen=True)
class ProblemParams:
    """Static instance parameters.

    d        feature dimension
    N        number of arms available each round
    k        maximum super-arm size
    T        horizon in rounds
    R        sub-Gaussian scale of the reward noise
    S        upper bound on the l2 norm of the true parameter
    delta    confidence level used by theoretical parameter schedules
    """

    d: int
    N: int
    k: int
    T: int
    R: float
    S: float
    delta: float

    def __post_init__(self) -> None:
        for name in ("d", "N", "k", "T"):
            _check_positive_int(name, getattr(self, name))
        if self.k > self.N:
            raise ValueError(f"k={self.k} exceeds N={self.N}")
        if self.R < 0:
            raise ValueError(f"R must be >= 0, got {self.R}")
        if self.S <= 0:
            raise ValueError(f"S must be > 0, got {self.S}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")


@dataclass(frozen=True)
class TopK:
    """Feasible sets are all subsets of the arm index range with exactly k members."""

    k: int

    def __post_init__(self) -> None:
        if self.k < 0:
            raise ValueError(f"k must be >= 0, got {self.k}")

    def contains(self, indices: tuple[int, ...], n_arms: int) -> bool:
        if len(indices) != self.k:
            return False
        return all(0 <= i < n_arms for i in indices)


@dataclass(frozen=True)
class PromotionAssignment:
    """Feasible sets pick exactly k (user, promotion) pairs, each user at most once.

    Arm index j * num_users + i stands for user i paired with promotion j.
    """

    num_users: int
    num_promotions: int
    k: int

    def __post_init__(self) -> None:
        _check_positive_int("num_users", self.num_users)
        _check_positive_int("num_promotions", self.num_promotions)
        if self.k < 0 or self.k > self.num_users:
            raise ValueError(
                f"k must lie in [0, num_users={self.num_users}], got {self.k}"
            )

    @property
    def n_arms(self) -> int:
        return self.num_users * self.num_promotions

    def user_of(self, arm: int) -> int:
        return arm % self.num_users

    def promotion_of(self, arm: int) -> int:
        return arm // self.num_users

    def contains(self, indices: tuple[int, ...], n_arms: int | None = None) -> bool:
        total = self.n_arms if n_arms is None else n_arms
        if len(indices) != self.k:
            return False
        if not all(0 <= i < total for i in indices):
            return False
        users = [self.user_of(i) for i in indices]
        return len(set(users)) == len(users)


ConstraintFamily = TopK | PromotionAssignment


@dataclass(frozen=True)
class SuperArm:
    """A chosen set of arm indices, stored sorted and duplicate free."""

    indices: tuple[int, ...]

    def __post_init__(self) -> None:
        idx = self.indices
        if any(i < 0 for i in idx):
            raise ValueError(f"arm indices must be >= 0, got {idx}")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError(f"arm indices must be strictly increasing, got {idx}")

    @classmethod
    def from_indices(cls, indices) -> "SuperArm":
        return cls(tuple(int(i) for i in sorted(indices)))

    def __len__(self) -> int:
        return len(self.indices)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.intp)


@dataclass(frozen=True)
class RewardFeedback:
    """Semi-bandit feedback: one realized reward per chosen arm."""

    arm_indices: tuple[int, ...]
    rewards: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.arm_indices) != len(self.rewards):
            raise ValueError("arm_indices and rewards must have equal length")

    def matches(self, arm: SuperArm) -> bool:
        return self.arm_indices == arm.indices


def _validate_features(features: np.ndarray) -> np.ndarray:
    """Reject norm violations beyond slack; renormalize float-level excess."""
    if features.ndim != 2:
        raise ValueError(f"features must be 2-d, got shape {features.shape}")
    norms = np.linalg.norm(features, axis=1)
    worst = float(norms.max(initial=0.0))
    if worst > 1.0 + NORM_SLACK:
        bad = int(np.argmax(norms))
        raise ValueError(
            f"feature norm bound violated: arm {bad} has norm {worst:.17g}"
        )
    over = norms > 1.0
    if np.any(over):
        features = features.copy()
        features[over] /= norms[over, np.newaxis]
    return features


@dataclass(frozen=True)
class RoundContext:
    """Everything a policy sees at the start of round t.

    For blocks == 1, row i of `features` is arm i's vector.  For blocks == M
    the conceptual arm set has features.shape[0] * M entries: arm
    j * features.shape[0] + i is row i's vector embedded in block j of a
    block-structured parameter space.  Block vectors are never materialized.
    """

    t: int
    features: np.ndarray
    constraint: ConstraintFamily
    blocks: int = 1
    user_ids: np.ndarray | None = None

    def __post_init__(self) -> None:
        _check_positive_int("t", self.t)
        _check_positive_int("blocks", self.blocks)
        object.__setattr__(self, "features", _validate_features(self.features))
        if isinstance(self.constraint, PromotionAssignment):
            if self.blocks != self.constraint.num_promotions:
                raise ValueError("blocks must equal the constraint's promotion count")
            if self.features.shape[0] != self.constraint.num_users:
                raise ValueError("feature rows must equal the constraint's user count")

    @property
    def n_base(self) -> int:
        return self.features.shape[0]

    @property
    def n_arms(self) -> int:
        return self.features.shape[0] * self.blocks

    @property
    def base_dim(self) -> int:
        return self.features.shape[1]

    def arm_feature(self, arm: int) -> np.ndarray:
        """Base vector for one arm (its block position is arm // n_base)."""
        return self.features[arm % self.n_base]

    def with_round(self, t: int) -> "RoundContext":
        return dataclasses.replace(self, t=t)


@dataclass
class RoundRecord:
    """One logged round: the choice, what it scored, and what it earned.

    Ground-truth fields (true_means, optimal_value, estimator_distance,
    confidence_radius) stay None when the environment cannot supply them.
    """

    t: int
    arm: SuperArm
    scores: np.ndarray
    rewards: np.ndarray
    mean_estimates: np.ndarray
    width_sq_sum: float
    shadow_width_sq_sum: float | None = None
    true_means: np.ndarray | None = None
    optimal_value: float | None = None
    estimator_distance: float | None = None
    confidence_radius: float | None = None
    all_scores: np.ndarray | None = None

    def __post_init__(self) -> None:
        n = len(self.arm)
        for name in ("scores", "rewards", "mean_estimates"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} must have one entry per chosen arm")
        if self.true_means is not None and len(self.true_means) != n:
            raise ValueError("true_means must have one entry per chosen arm")


@dataclass
class TrajectoryLog:
    """Per-round records plus running cumulative reward."""

    records: list[RoundRecord] = field(default_factory=list)
    cum_rewards: list[float] = field(default_factory=list)

    def append(self, record: RoundRecord) -> None:
        if record.t != len(self.records) + 1:
            raise ValueError(
                f"round {record.t} appended out of order (have {len(self.records)})"
            )
        total = self.cum_rewards[-1] if self.cum_rewards else 0.0
        self.records.append(record)
        self.cum_rewards.append(total + float(np.sum(record.rewards)))

    def __len__(self) -> int:
        return len(self.records)

    @property
    def horizon(self) -> int:
        return len(self.records)

    def cumulative_reward(self) -> float:
        return self.cum_rewards[-1] if self.cum_rewards else 0.0

    def _require_ground_truth(self) -> None:
        for rec in self.records:
            if rec.true_means is None or rec.optimal_value is None:
                raise GroundTruthMissingError(
                    f"round {rec.t} lacks ground-truth expected rewards"
                )


def pseudo_regret(log: TrajectoryLog) -> float:
    """Sum over rounds of (optimal expected value - chosen expected value)."""
    log._require_ground_truth()
    total = 0.0
    for rec in log.records:
        total += rec.optimal_value - float(np.sum(rec.true_means))
    return total


def regret_decomposition(log: TrajectoryLog) -> tuple[float, float, float]:
    """Split realized optimism into three telescoping pieces.

    Returns (r_opt, r_alg, r_est):
      r_opt  optimal expected value minus the policy's own scores
      r_alg  scores minus the estimator's predicted rewards
      r_est  predicted rewards minus true expected rewards
    The three sum to pseudo_regret(log) exactly, by cancellation.
    """
    log._require_ground_truth()
    r_opt = 0.0
    r_alg = 0.0
    r_est = 0.0
    for rec in log.records:
        scores = float(np.sum(rec.scores))
        means = float(np.sum(rec.mean_estimates))
        truth = float(np.sum(rec.true_means))
        r_opt += rec.optimal_value - scores
        r_alg += scores - means
        r_est += means - truth
    return r_opt, r_alg, r_est
