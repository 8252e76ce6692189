"""Plotting companion for the bandit harness's CSV and binary outputs."""

from .figures import (
    FIGURE_KINDS,
    PlotSpec,
    angle_sweep_series,
    avg_reward_series,
    cosine_similarities,
    plot_angle_sweep,
    plot_avg_reward,
    plot_cosine_hist,
)
from .formats import (
    FEATURE_MAGIC,
    FEATURE_VERSION,
    SUMMARY_HEADER,
    TRAJECTORY_HEADER,
    HeaderMismatchError,
    SummaryRow,
    policy_of_trajectory,
    read_feature_table,
    read_summary,
    read_trajectory,
)

__all__ = [
    "FEATURE_MAGIC",
    "FEATURE_VERSION",
    "FIGURE_KINDS",
    "HeaderMismatchError",
    "PlotSpec",
    "SUMMARY_HEADER",
    "SummaryRow",
    "TRAJECTORY_HEADER",
    "angle_sweep_series",
    "avg_reward_series",
    "cosine_similarities",
    "plot_angle_sweep",
    "plot_avg_reward",
    "plot_cosine_hist",
    "policy_of_trajectory",
    "read_feature_table",
    "read_summary",
    "read_trajectory",
]
