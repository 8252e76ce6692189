"""Readers for the harness's external file contracts.

Nothing here imports the harness: the two CSV headers and the feature binary
layout are the whole interface.

  trajectory CSV   t,cum_reward,avg_reward,pseudo_regret,containment,potential_sum
  summary CSV      policy,lambda,param2,mean_cum_reward,best
  feature binary   magic "CLSF", u32 version, u32 num_users, u32 d,
                   then num_users * d little-endian float64, row major
"""

from __future__ import annotations

import io
import re
import struct
from dataclasses import dataclass

import numpy as np

TRAJECTORY_HEADER = "t,cum_reward,avg_reward,pseudo_regret,containment,potential_sum"
SUMMARY_HEADER = "policy,lambda,param2,mean_cum_reward,best"
FEATURE_MAGIC = b"CLSF"
FEATURE_VERSION = 1

## trajectory_<policy>_<cell>_<trial>.csv
TRAJECTORY_NAME = re.compile(r"trajectory_(?P<policy>.+)_(\d+)_(\d+)\.csv$")


class HeaderMismatchError(ValueError):
    """An input CSV does not carry the expected column layout."""


def _check_header(path: str, got: str, expected: str) -> None:
    if got != expected:
        want = expected.split(",")
        have = got.split(",")
        for i, name in enumerate(want):
            if i >= len(have) or have[i] != name:
                raise HeaderMismatchError(
                    f"{path}: expected column {i} to be {name!r}, "
                    f"got {have[i]!r}" if i < len(have) else
                    f"{path}: missing column {name!r}"
                )
        raise HeaderMismatchError(f"{path}: trailing columns beyond {expected!r}")


def read_trajectory(path: str) -> dict[str, np.ndarray]:
    """Columns of one trajectory CSV, keyed by header name."""
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().rstrip("\n")
        _check_header(path, header, TRAJECTORY_HEADER)
        body = fh.read()
    if not body.strip():
        raise ValueError(f"{path}: no data rows")
    data = np.loadtxt(io.StringIO(body), delimiter=",", ndmin=2)
    return {name: data[:, i] for i, name in enumerate(header.split(","))}


@dataclass(frozen=True)
class SummaryRow:
    policy: str
    lam: float
    param2: float
    mean_cum_reward: float
    best: bool


def read_summary(path: str) -> list[SummaryRow]:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().rstrip("\n")
        _check_header(path, header, SUMMARY_HEADER)
        rows = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            policy, lam, p2, mean, best = line.split(",")
            rows.append(
                SummaryRow(
                    policy=policy,
                    lam=float(lam),
                    param2=float(p2),
                    mean_cum_reward=float(mean),
                    best=best == "1",
                )
            )
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return rows


def policy_of_trajectory(path: str) -> str:
    """Policy name encoded in a trajectory file name."""
    m = TRAJECTORY_NAME.search(path)
    if m is None:
        raise ValueError(f"{path}: not a trajectory file name")
    return m.group("policy")


def read_feature_table(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != FEATURE_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        version, num_users, d = struct.unpack("<III", fh.read(12))
        if version != FEATURE_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        payload = fh.read(num_users * d * 8)
        if len(payload) != num_users * d * 8:
            raise ValueError(f"{path}: truncated feature payload")
    return np.frombuffer(payload, dtype="<f8").reshape(num_users, d).copy()
