"""Exact super-arm selection for the supported constraint families.

Both fast oracles are exact maximizers, not approximations, and both break
score ties deterministically so runs are reproducible bit for bit:

  top_k_select        ties resolve toward smaller arm index
  promotion_select    per user, ties resolve toward the smaller promotion
                      index; across users, toward the smaller user index

brute_force_select enumerates the whole family and applies the same order,
so the fast oracles can be cross-checked on small instances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import PromotionAssignment, SuperArm, TopK

## Enumeration guard for the brute-force oracle.
BRUTE_FORCE_LIMIT = 1_000_000


@dataclass(frozen=True)
class OracleResult:
    arm: SuperArm
    objective: float


def _top_k_indices(values: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest values, ties toward smaller index, ascending.

    argpartition keeps this O(n) on average; only the boundary value needs
    its ties resolved explicitly.
    """
    n = values.shape[0]
    if k == 0:
        return np.empty(0, dtype=np.intp)
    if k == n:
        return np.arange(n, dtype=np.intp)
    part = np.argpartition(values, n - k)[n - k :]
    vstar = values[part].min()
    chosen = np.flatnonzero(values > vstar)
    need = k - chosen.shape[0]
    ties = np.flatnonzero(values == vstar)[:need]
    out = np.concatenate([chosen, ties])
    out.sort()
    return out


def top_k_select(scores: np.ndarray, k: int) -> OracleResult:
    """Best super arm under the TopK family: the k largest scores."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1:
        raise ValueError(f"scores must be 1-d, got shape {scores.shape}")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    if k < 0 or k > scores.shape[0]:
        raise ValueError(f"k={k} out of range for {scores.shape[0]} arms")
    idx = _top_k_indices(scores, k)
    return OracleResult(SuperArm(tuple(int(i) for i in idx)), float(scores[idx].sum()))


def promotion_select(
    scores: np.ndarray, num_users: int, num_promotions: int, k: int
) -> OracleResult:
    """Best assignment of promotions: each chosen user gets its best promotion.

    The family's objective separates over users, so picking each user's best
    promotion and then the k best users is exact.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (num_users * num_promotions,):
        raise ValueError(
            f"scores must have length {num_users * num_promotions}, got {scores.shape}"
        )
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    if k < 0 or k > num_users:
        raise ValueError(f"k={k} out of range for {num_users} users")
    mat = scores.reshape(num_promotions, num_users)
    best_promotion = np.argmax(mat, axis=0)  # first occurrence wins ties
    best_value = mat[best_promotion, np.arange(num_users)]
    users = _top_k_indices(best_value, k)
    arms = best_promotion[users] * num_users + users
    arms = np.sort(arms)
    return OracleResult(
        SuperArm(tuple(int(a) for a in arms)), float(best_value[users].sum())
    )


def _enumerate_top_k(n: int, k: int):
    for combo in itertools.combinations(range(n), k):
        yield combo, combo


def _enumerate_promotion(family: PromotionAssignment):
    users_range = range(family.num_users)
    promos = range(family.num_promotions)
    for users in itertools.combinations(users_range, family.k):
        for assignment in itertools.product(promos, repeat=family.k):
            arms = tuple(
                sorted(j * family.num_users + i for i, j in zip(users, assignment))
            )
            key = tuple(zip(users, assignment))  # sorted by user already
            yield arms, key


def brute_force_select(scores: np.ndarray, family) -> OracleResult:
    """Enumerate every feasible set; intended for oracle cross-checks only.

    Ties between maximizing sets resolve toward the smallest tie-break key,
    which reproduces the fast oracles' deterministic choice.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if isinstance(family, TopK):
        n = scores.shape[0]
        count = math.comb(n, family.k)
        gen = _enumerate_top_k(n, family.k)
    elif isinstance(family, PromotionAssignment):
        if scores.shape != (family.n_arms,):
            raise ValueError(f"scores must have length {family.n_arms}")
        count = math.comb(family.num_users, family.k) * (
            family.num_promotions**family.k
        )
        gen = _enumerate_promotion(family)
    else:
        raise TypeError(f"unsupported constraint family: {family!r}")
    if count > BRUTE_FORCE_LIMIT:
        raise ValueError(
            f"family has {count} feasible sets, above the {BRUTE_FORCE_LIMIT} guard"
        )
    best_arms = None
    best_key = None
    best_obj = -math.inf
    for arms, key in gen:
        obj = float(scores[list(arms)].sum())
        if obj > best_obj or (obj == best_obj and key < best_key):
            best_arms, best_key, best_obj = arms, key, obj
    if best_arms is None:
        return OracleResult(SuperArm(()), 0.0)
    return OracleResult(SuperArm(best_arms), best_obj)
