"""Figure builders over the harness's output files.

Each figure has a pure data builder (arrays in, arrays out) and a thin
renderer that draws the builder's result; tests pin the builders, renders
are smoke-checked.  Output format follows the file extension (svg by
default).
"""

from __future__ import annotations

import glob as globmod
import os
import re
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import numpy as np
from matplotlib import pyplot as plt

from .formats import (
    policy_of_trajectory,
    read_feature_table,
    read_summary,
    read_trajectory,
)

FIGURE_KINDS = ("angle_sweep", "cosine_hist", "avg_reward")

## first numeric run in a directory name is the sweep coordinate
_NUMBER = re.compile(r"\d+(?:\.\d+)?(?:[eE]-?\d+)?")


@dataclass(frozen=True)
class PlotSpec:
    """What to read, which figure to draw, where to write it."""

    input_glob: str
    kind: str
    output: str
    labels: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"kind must be one of {FIGURE_KINDS}, got {self.kind!r}")

    def matched_files(self) -> list[str]:
        files = sorted(globmod.glob(self.input_glob))
        if not files:
            raise FileNotFoundError(f"no files match {self.input_glob!r}")
        return files

    def label(self, policy: str) -> str:
        return self.labels.get(policy, policy)


## ---------------------------------------------------------------------------
## Data builders.


def avg_reward_series(paths: list[str]) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Mean running-average reward per policy, over that policy's files.

    All files must agree on the round column.
    """
    by_policy: dict[str, list[np.ndarray]] = {}
    t_ref = None
    for path in paths:
        cols = read_trajectory(path)
        if t_ref is None:
            t_ref = cols["t"]
        elif not np.array_equal(cols["t"], t_ref):
            raise ValueError(f"{path}: round column differs from the other files")
        by_policy.setdefault(policy_of_trajectory(path), []).append(
            cols["avg_reward"]
        )
    series = {
        policy: np.mean(np.stack(rows), axis=0)
        for policy, rows in sorted(by_policy.items())
    }
    return t_ref, series


def cosine_similarities(
    features: np.ndarray, sample_size: int, rng: np.random.Generator
) -> np.ndarray:
    """Cosine similarity over sampled user pairs, constant coordinate dropped.

    All distinct pairs when there are at most sample_size of them, otherwise
    sample_size pairs drawn uniformly (duplicates possible).
    """
    n = features.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 users, got {n}")
    core = features[:, :-1]
    if core.shape[1] == 0:
        raise ValueError("features carry only the constant coordinate")
    norms = np.linalg.norm(core, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("zero-norm feature row after dropping the constant")
    total = n * (n - 1) // 2
    if total <= sample_size:
        i, j = np.triu_indices(n, k=1)
    else:
        i = rng.integers(0, n, size=2 * sample_size)
        j = rng.integers(0, n, size=2 * sample_size)
        keep = i != j
        i, j = i[keep][:sample_size], j[keep][:sample_size]
    sims = np.einsum("ij,ij->i", core[i], core[j]) / (norms[i] * norms[j])
    return np.clip(sims, -1.0, 1.0)


def angle_sweep_series(
    summary_paths: list[str],
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Best mean cumulative reward per policy against the sweep coordinate.

    The coordinate is the first number in each summary file's directory name.
    """
    points: list[tuple[float, dict[str, float]]] = []
    for path in summary_paths:
        dirname = os.path.basename(os.path.dirname(os.path.abspath(path)))
        m = _NUMBER.search(dirname)
        if m is None:
            raise ValueError(f"{path}: no sweep coordinate in directory {dirname!r}")
        best = {
            row.policy: row.mean_cum_reward
            for row in read_summary(path)
            if row.best
        }
        points.append((float(m.group()), best))
    points.sort(key=lambda p: p[0])
    angles = np.array([a for a, _ in points])
    policies = sorted({p for _, best in points for p in best})
    series = {
        policy: np.array([best.get(policy, np.nan) for _, best in points])
        for policy in policies
    }
    return angles, series


## ---------------------------------------------------------------------------
## Renderers.


def _finish(fig, ax, output: str):
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(output)
    plt.close(fig)
    return output


def plot_avg_reward(spec: PlotSpec):
    """One line per policy: mean over trials of average reward per round."""
    t, series = avg_reward_series(spec.matched_files())
    fig, ax = plt.subplots(figsize=(6, 4))
    for policy, values in series.items():
        ax.plot(t, values, marker="o", markersize=3, label=spec.label(policy))
    ax.set_xlabel("round")
    ax.set_ylabel("average reward")
    ax.legend()
    return _finish(fig, ax, spec.output), (t, series)


def plot_cosine_hist(
    feature_table_path: str,
    sample_size: int,
    output: str,
    bins: int = 50,
    seed: int = 0,
):
    """Density histogram of pairwise feature cosine similarity."""
    features = read_feature_table(feature_table_path)
    sims = cosine_similarities(
        features, sample_size, np.random.default_rng(np.random.SeedSequence(seed))
    )
    heights, edges = np.histogram(sims, bins=bins, range=(-1.0, 1.0), density=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(edges[:-1], heights, width=np.diff(edges), align="edge")
    ax.set_xlabel("cosine similarity")
    ax.set_ylabel("density")
    return _finish(fig, ax, output), (heights, edges)


def plot_angle_sweep(spec: PlotSpec):
    """Tuned cumulative reward per policy across a directory sweep."""
    angles, series = angle_sweep_series(spec.matched_files())
    fig, ax = plt.subplots(figsize=(6, 4))
    for policy, values in series.items():
        ax.plot(angles, values, marker="s", markersize=4, label=spec.label(policy))
    ax.set_xlabel("cluster angle")
    ax.set_ylabel("mean cumulative reward")
    ax.legend()
    return _finish(fig, ax, spec.output), (angles, series)
