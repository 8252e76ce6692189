"""Incremental ridge-regression state shared by every policy.

The design matrix statistic V = lam * I + sum x x^T and the response
statistic b = sum r * x are maintained exactly; a lower-triangular Cholesky
factor of V is maintained incrementally through rank-one updates and
refactorized from V periodically so factor drift cannot accumulate over a
long run.  No explicit inverse is ever formed.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import cholesky as dense_cholesky
from scipy.linalg import solve_triangular

## Refactorize after this many incremental updates, and whenever the factor
## residual check trips.  The residual tolerance is relative to ||V||_F.
REFACTOR_PERIOD = 256
RESIDUAL_RTOL = 1e-8
## Residual checks cost O(d^2); amortize them instead of paying per update.
RESIDUAL_CHECK_EVERY = 32


def _chol_rank_one_update(chol: np.ndarray, x: np.ndarray) -> None:
    """In-place update of lower-triangular chol so chol chol^T gains x x^T."""
    work = x.astype(np.float64, copy=True)
    d = work.shape[0]
    for i in range(d):
        lii = chol[i, i]
        r = math.hypot(lii, work[i])
        c = r / lii
        s = work[i] / lii
        chol[i, i] = r
        if i + 1 < d:
            chol[i + 1 :, i] = (chol[i + 1 :, i] + s * work[i + 1 :]) / c
            work[i + 1 :] = c * work[i + 1 :] - s * chol[i + 1 :, i]


class RidgeState:
    """Ridge statistics (V, b) with a maintained Cholesky factor of V."""

    def __init__(self, d: int, lam: float) -> None:
        if d < 1:
            raise ValueError(f"d must be >= 1, got {d}")
        if lam <= 0:
            raise ValueError(f"lam must be > 0, got {lam}")
        self.d = int(d)
        self.lam = float(lam)
        self.V = np.eye(self.d) * self.lam
        self.b = np.zeros(self.d)
        self.chol = np.eye(self.d) * math.sqrt(self.lam)
        self.update_count = 0

    def _check_vector(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.d,):
            raise ValueError(f"expected vector of shape ({self.d},), got {x.shape}")
        return x

    def rank_one_update(self, x: np.ndarray, r: float) -> None:
        """Fold in one observation: V += x x^T, b += r * x."""
        x = self._check_vector(x)
        if not np.any(x):
            return
        self.V += np.outer(x, x)
        self.b += float(r) * x
        _chol_rank_one_update(self.chol, x)
        self.update_count += 1
        if self.update_count >= REFACTOR_PERIOD or (
            self.update_count % RESIDUAL_CHECK_EVERY == 0 and self._residual_breach()
        ):
            self.refactorize()

    def add_batch(self, X: np.ndarray, rewards: np.ndarray) -> None:
        """Fold in a whole round of observations, then refactorize once.

        Equivalent to len(rewards) rank-one updates; preferred when a round
        contributes on the order of d observations or more.
        """
        X = np.asarray(X, dtype=np.float64)
        rewards = np.asarray(rewards, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.d:
            raise ValueError(f"expected shape (m, {self.d}), got {X.shape}")
        if X.shape[0] != rewards.shape[0]:
            raise ValueError("one reward per row required")
        if X.shape[0] == 0:
            return
        self.V += X.T @ X
        self.b += X.T @ rewards
        self.refactorize()

    def _residual_breach(self) -> bool:
        resid = np.linalg.norm(self.chol @ self.chol.T - self.V)
        return resid > RESIDUAL_RTOL * np.linalg.norm(self.V)

    def refactorize(self) -> None:
        """Recompute the factor from V; resets the incremental update counter."""
        self.chol = dense_cholesky(self.V, lower=True)
        self.update_count = 0

    def theta_hat(self) -> np.ndarray:
        """Ridge estimate V^{-1} b via two triangular solves."""
        y = solve_triangular(self.chol, self.b, lower=True)
        return solve_triangular(self.chol, y, lower=True, trans="T")

    def width(self, x: np.ndarray) -> float:
        """sqrt(x^T V^{-1} x); zero exactly when x is the zero vector."""
        x = self._check_vector(x)
        y = solve_triangular(self.chol, x, lower=True)
        q = float(y @ y)
        return math.sqrt(max(q, 0.0))

    def widths(self, X: np.ndarray) -> np.ndarray:
        """Vectorized width over the rows of X."""
        X = np.asarray(X, dtype=np.float64)
        Y = solve_triangular(self.chol, X.T, lower=True)
        q = np.einsum("ij,ij->j", Y, Y)
        return np.sqrt(np.maximum(q, 0.0))

    def solve_lower(self, X: np.ndarray) -> np.ndarray:
        """L^{-1} X^T for rows of X; columns give both widths and sample dots."""
        return solve_triangular(self.chol, np.asarray(X, dtype=np.float64).T, lower=True)

    def sample_posterior(
        self, mean: np.ndarray, v: float, rng: np.random.Generator
    ) -> np.ndarray:
        """One draw from N(mean, v^2 V^{-1}) via a triangular solve.

        Consumes exactly d standard normals.  v = 0 returns mean exactly.
        """
        if v < 0:
            raise ValueError(f"v must be >= 0, got {v}")
        eta = rng.standard_normal(self.d)
        perturbation = solve_triangular(self.chol, eta, lower=True, trans="T")
        return mean + v * perturbation

    def mahalanobis(self, z: np.ndarray) -> float:
        """sqrt(z^T V z), the V-weighted norm used by containment checks."""
        z = self._check_vector(z)
        return float(np.linalg.norm(self.chol.T @ z))


class ShadowState:
    """Shadow statistic bar-V = lam * I + (lam / k) sum x x^T.

    Tracks the same observation stream as a RidgeState but with every outer
    product damped by lam / k; its widths upper-bound the main widths when
    lam <= k and drive the small-lam potential diagnostic.
    """

    def __init__(self, d: int, lam: float, k: int) -> None:
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        self.k = int(k)
        self.scale = math.sqrt(lam / k)
        self._state = RidgeState(d, lam)

    @property
    def V(self) -> np.ndarray:
        return self._state.V

    def rank_one_update(self, x: np.ndarray) -> None:
        self._state.rank_one_update(self.scale * np.asarray(x, dtype=np.float64), 0.0)

    def add_batch(self, X: np.ndarray) -> None:
        X = np.asarray(X, dtype=np.float64)
        self._state.add_batch(self.scale * X, np.zeros(X.shape[0]))

    def width(self, x: np.ndarray) -> float:
        return self._state.width(x)

    def widths(self, X: np.ndarray) -> np.ndarray:
        return self._state.widths(X)


class BlockRidgeState:
    """M independent ridge states over a block-structured parameter space.

    An arm index a in [0, M * n_base) addresses base vector a mod n_base
    embedded in block a // n_base.  Because block embeddings of different
    blocks are orthogonal, the full (d*M x d*M) statistic is block diagonal
    and each block evolves as its own RidgeState.
    """

    def __init__(self, d: int, num_blocks: int, lam: float) -> None:
        if num_blocks < 1:
            raise ValueError(f"num_blocks must be >= 1, got {num_blocks}")
        self.d = int(d)
        self.num_blocks = int(num_blocks)
        self.lam = float(lam)
        self.blocks = [RidgeState(d, lam) for _ in range(num_blocks)]

    def block_of(self, arm: int, n_base: int) -> RidgeState:
        return self.blocks[arm // n_base]

    def update_arm(self, arm: int, n_base: int, x: np.ndarray, r: float) -> None:
        self.block_of(arm, n_base).rank_one_update(x, r)


class BlockShadowState:
    """Block-diagonal counterpart of ShadowState."""

    def __init__(self, d: int, num_blocks: int, lam: float, k: int) -> None:
        self.blocks = [ShadowState(d, lam, k) for _ in range(num_blocks)]

    def update_arm(self, arm: int, n_base: int, x: np.ndarray) -> None:
        self.blocks[arm // n_base].rank_one_update(x)
