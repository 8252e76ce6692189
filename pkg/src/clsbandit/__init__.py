"""Combinatorial linear semi-bandit policies, environments, and harness."""

from .core import (
    GroundTruthMissingError,
    ProblemParams,
    PromotionAssignment,
    RewardFeedback,
    RoundContext,
    RoundRecord,
    SuperArm,
    TopK,
    TrajectoryLog,
    pseudo_regret,
    regret_decomposition,
)
from .linalg import BlockRidgeState, RidgeState, ShadowState
from .oracles import OracleResult, brute_force_select, promotion_select, top_k_select
from .policies import PolicySpec, beta, policy_step
from .runner import ExperimentConfig, grid, run_and_summarize, run_cell

__all__ = [
    "GroundTruthMissingError",
    "ProblemParams",
    "PromotionAssignment",
    "RewardFeedback",
    "RoundContext",
    "RoundRecord",
    "SuperArm",
    "TopK",
    "TrajectoryLog",
    "pseudo_regret",
    "regret_decomposition",
    "BlockRidgeState",
    "RidgeState",
    "ShadowState",
    "OracleResult",
    "brute_force_select",
    "promotion_select",
    "top_k_select",
    "PolicySpec",
    "beta",
    "policy_step",
    "ExperimentConfig",
    "grid",
    "run_and_summarize",
    "run_cell",
]

__version__ = "0.1.0"
