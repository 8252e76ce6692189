"""Score generators and the per-round policy step.

Five score rules share one ridge state.  Writing r_hat for the per-arm score,
theta_hat for the ridge estimate, and w(x) = sqrt(x^T V^{-1} x):

  greedy     round 1: independent standard-normal scores; later theta_hat . x
  c2ucb      r_hat = theta_hat . x + alpha_t * w(x)
  pc2ucb     r_hat = theta_hat . x + (1 + c_tilde) * alpha_t * w(x), with
             c_tilde drawn per arm, uniform on the half-open [0, c)
  rwts       one posterior draw theta_tilde per round, r_hat = theta_tilde . x
  awts       one posterior draw per arm, in increasing arm-index order

Every function takes its randomness as an explicit numpy Generator; nothing
here touches global rng state.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import PromotionAssignment, ProblemParams, RoundContext, SuperArm, TopK
from .linalg import BlockRidgeState, RidgeState
from .oracles import OracleResult, promotion_select, top_k_select

POLICY_KINDS = ("greedy", "c2ucb", "pc2ucb", "rwts", "awts")
UCB_KINDS = ("c2ucb", "pc2ucb")
TS_KINDS = ("rwts", "awts")


def beta(t: int, delta: float, params: ProblemParams, lam: float) -> float:
    """Confidence radius R * sqrt(d * ln((1 + k t / lam) / delta)) + sqrt(lam) * S.

    Natural log.  For delta < 1 the log argument exceeds 1 and the radicand
    is positive; delta = 1 is accepted for diagnostics, and a negative
    radicand (only possible there) is clamped to 0 with a warning.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    if lam <= 0:
        raise ValueError(f"lam must be > 0, got {lam}")
    radicand = params.d * math.log((1.0 + params.k * t / lam) / delta)
    if radicand < 0.0:
        warnings.warn(
            f"confidence radius log term clamped at 0 (t={t}, delta={delta})",
            RuntimeWarning,
        )
        radicand = 0.0
    return params.R * math.sqrt(radicand) + math.sqrt(lam) * params.S


@dataclass(frozen=True)
class PolicySpec:
    """A policy kind plus its tuning knobs.

    alpha (UCB kinds) and v (TS kinds) fix the exploration weight for the
    whole run; leaving the relevant one unset selects the theoretical
    schedule driven by `delta`, which then requires ProblemParams at step
    time.  The schedules are beta(t, delta) for c2ucb and pc2ucb,
    beta(t, delta / (4T)) for rwts, and beta(t, delta / (4NT)) for awts.
    """

    kind: str
    lam: float
    alpha: float | None = None
    v: float | None = None
    delta: float | None = None
    c: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.lam <= 0:
            raise ValueError(f"lam must be > 0, got {self.lam}")
        if self.alpha is not None and self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.v is not None and self.v < 0:
            raise ValueError(f"v must be >= 0, got {self.v}")
        if self.c < 0:
            raise ValueError(f"c must be >= 0, got {self.c}")
        if self.kind in UCB_KINDS and self.alpha is None and self.delta is None:
            raise ValueError(f"{self.kind} needs alpha or delta")
        if self.kind in TS_KINDS and self.v is None and self.delta is None:
            raise ValueError(f"{self.kind} needs v or delta")
        if self.delta is not None and not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")

    def exploration_weight(self, t: int, params: ProblemParams | None) -> float:
        """alpha_t or v_t for round t, resolving the theoretical schedule."""
        if self.kind == "greedy":
            return 0.0
        if self.kind in UCB_KINDS:
            if self.alpha is not None:
                return self.alpha
        elif self.v is not None:
            return self.v
        if params is None:
            raise ValueError("theoretical schedules need ProblemParams")
        if self.kind in UCB_KINDS:
            return beta(t, self.delta, params, self.lam)
        if self.kind == "rwts":
            return beta(t, self.delta / (4.0 * params.T), params, self.lam)
        return beta(t, self.delta / (4.0 * params.N * params.T), params, self.lam)


## ---------------------------------------------------------------------------
## Per-arm geometry, shared by the score rules.  Each helper handles both a
## plain RidgeState and the block-diagonal state used by promotion rounds,
## where arm j * n_base + i scores base vector i against block j.


def _states_for(state, ctx: RoundContext) -> list[RidgeState]:
    if isinstance(state, BlockRidgeState):
        if state.num_blocks != ctx.blocks:
            raise ValueError(
                f"state has {state.num_blocks} blocks, context has {ctx.blocks}"
            )
        return state.blocks
    if ctx.blocks != 1:
        raise ValueError("block-structured context needs a BlockRidgeState")
    return [state]


def mean_scores(state, ctx: RoundContext) -> np.ndarray:
    """theta_hat . x for every conceptual arm, in arm-index order."""
    parts = [ctx.features @ s.theta_hat() for s in _states_for(state, ctx)]
    return np.concatenate(parts) if len(parts) > 1 else parts[0]


def width_scores(state, ctx: RoundContext) -> np.ndarray:
    """w(x) = sqrt(x^T V^{-1} x) for every conceptual arm."""
    parts = [s.widths(ctx.features) for s in _states_for(state, ctx)]
    return np.concatenate(parts) if len(parts) > 1 else parts[0]


def score_greedy(
    ctx: RoundContext, state, t: int, rng: np.random.Generator
) -> np.ndarray:
    """Standard-normal scores in round 1, pure exploitation afterwards."""
    if t == 1:
        return rng.standard_normal(ctx.n_arms)
    return mean_scores(state, ctx)


def score_c2ucb(ctx: RoundContext, state, alpha_t: float) -> np.ndarray:
    if alpha_t < 0:
        raise ValueError(f"alpha_t must be >= 0, got {alpha_t}")
    return mean_scores(state, ctx) + alpha_t * width_scores(state, ctx)


def score_pc2ucb(
    ctx: RoundContext, state, alpha_t: float, c: float, rng: np.random.Generator
) -> np.ndarray:
    """c2ucb with the width term scaled per arm by (1 + c_tilde), c_tilde ~ U[0, c)."""
    if alpha_t < 0:
        raise ValueError(f"alpha_t must be >= 0, got {alpha_t}")
    if c < 0:
        raise ValueError(f"c must be >= 0, got {c}")
    c_tilde = rng.uniform(0.0, c, size=ctx.n_arms)
    return mean_scores(state, ctx) + (1.0 + c_tilde) * alpha_t * width_scores(state, ctx)


def score_rwts(
    ctx: RoundContext, state, v_t: float, rng: np.random.Generator
) -> np.ndarray:
    """One shared posterior draw per round; scores are its inner products.

    For a block-diagonal state, one draw of the full parameter means one
    d-dim draw per block, consumed in block order.
    """
    if v_t < 0:
        raise ValueError(f"v_t must be >= 0, got {v_t}")
    parts = []
    for s in _states_for(state, ctx):
        theta_tilde = s.sample_posterior(s.theta_hat(), v_t, rng)
        parts.append(ctx.features @ theta_tilde)
    return np.concatenate(parts) if len(parts) > 1 else parts[0]


def score_awts(
    ctx: RoundContext, state, v_t: float, rng: np.random.Generator
) -> np.ndarray:
    """An independent posterior draw per arm, in increasing arm-index order.

    Arm a's score is theta_tilde(a) . x(a) with theta_tilde(a) drawn from
    N(theta_hat, v_t^2 V^{-1}); only the d coordinates the arm's feature
    touches are sampled, which leaves the score distribution unchanged.
    """
    if v_t < 0:
        raise ValueError(f"v_t must be >= 0, got {v_t}")
    parts = []
    for s in _states_for(state, ctx):
        mean = ctx.features @ s.theta_hat()
        # theta_tilde(a) . x = theta_hat . x + v * eta_a . (L^{-1} x)
        y = s.solve_lower(ctx.features)
        eta = rng.standard_normal((ctx.n_base, s.d))
        parts.append(mean + v_t * np.einsum("ad,da->a", eta, y))
    return np.concatenate(parts) if len(parts) > 1 else parts[0]


def _select(scores: np.ndarray, ctx: RoundContext) -> OracleResult:
    constraint = ctx.constraint
    if isinstance(constraint, TopK):
        return top_k_select(scores, constraint.k)
    if isinstance(constraint, PromotionAssignment):
        return promotion_select(
            scores, constraint.num_users, constraint.num_promotions, constraint.k
        )
    raise TypeError(f"unsupported constraint family: {constraint!r}")


def policy_step(
    spec: PolicySpec,
    ctx: RoundContext,
    state,
    t: int,
    rng: np.random.Generator,
    params: ProblemParams | None = None,
) -> tuple[SuperArm, np.ndarray]:
    """Score every arm under `spec` and pick the best feasible super arm.

    Returns the chosen arm and the full score vector (the score vector is
    what the trajectory log records for the chosen arms).
    """
    if spec.kind == "greedy":
        scores = score_greedy(ctx, state, t, rng)
    elif spec.kind == "c2ucb":
        scores = score_c2ucb(ctx, state, spec.exploration_weight(t, params))
    elif spec.kind == "pc2ucb":
        scores = score_pc2ucb(
            ctx, state, spec.exploration_weight(t, params), spec.c, rng
        )
    elif spec.kind == "rwts":
        scores = score_rwts(ctx, state, spec.exploration_weight(t, params), rng)
    else:
        scores = score_awts(ctx, state, spec.exploration_weight(t, params), rng)
    result = _select(scores, ctx)
    return result.arm, scores
