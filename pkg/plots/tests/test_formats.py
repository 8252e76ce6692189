"""File contract readers: headers, naming, binary layout."""

import struct

import numpy as np
import pytest

from clsplots import (
    FEATURE_MAGIC,
    FEATURE_VERSION,
    SUMMARY_HEADER,
    TRAJECTORY_HEADER,
    HeaderMismatchError,
    policy_of_trajectory,
    read_feature_table,
    read_summary,
    read_trajectory,
)


def write_lines(path, lines):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def trajectory_lines(rows):
    return [TRAJECTORY_HEADER] + [",".join(f"{v:.17g}" for v in row) for row in rows]


def write_feature_file(path, arr, magic=FEATURE_MAGIC, version=FEATURE_VERSION):
    arr = np.asarray(arr, dtype=float)
    payload = magic + struct.pack("<III", version, arr.shape[0], arr.shape[1])
    payload += arr.astype("<f8").tobytes(order="C")
    path.write_bytes(payload)


class TestTrajectory:
    def test_reads_columns_by_name(self, tmp_path):
        path = tmp_path / "trajectory_c2ucb_0_0.csv"
        rows = [(1, 0.5, 0.5, 0.25, 1, 0.1), (2, 1.5, 0.75, 0.5, 0, 0.3)]
        write_lines(path, trajectory_lines(rows))
        cols = read_trajectory(str(path))
        assert sorted(cols) == sorted(TRAJECTORY_HEADER.split(","))
        assert np.array_equal(cols["t"], [1.0, 2.0])
        assert np.array_equal(cols["cum_reward"], [0.5, 1.5])
        assert np.array_equal(cols["containment"], [1.0, 0.0])

    def test_nan_cells_survive(self, tmp_path):
        path = tmp_path / "trajectory_greedy_0_0.csv"
        write_lines(path, [TRAJECTORY_HEADER, "1,2,2,nan,nan,0.5"])
        cols = read_trajectory(str(path))
        assert np.isnan(cols["pseudo_regret"][0])
        assert np.isnan(cols["containment"][0])

    def test_renamed_column_is_named_in_error(self, tmp_path):
        path = tmp_path / "trajectory_c2ucb_0_0.csv"
        write_lines(
            path,
            [TRAJECTORY_HEADER.replace("avg_reward", "avg_rew"), "1,1,1,0,1,0"],
        )
        with pytest.raises(HeaderMismatchError, match="avg_reward"):
            read_trajectory(str(path))

    def test_missing_column_is_named_in_error(self, tmp_path):
        path = tmp_path / "trajectory_c2ucb_0_0.csv"
        write_lines(path, ["t,cum_reward,avg_reward,pseudo_regret,containment", "1,1,1,0,1"])
        with pytest.raises(HeaderMismatchError, match="potential_sum"):
            read_trajectory(str(path))

    def test_trailing_column_rejected(self, tmp_path):
        path = tmp_path / "trajectory_c2ucb_0_0.csv"
        write_lines(path, [TRAJECTORY_HEADER + ",extra", "1,1,1,0,1,0,9"])
        with pytest.raises(HeaderMismatchError):
            read_trajectory(str(path))

    def test_header_only_file_rejected(self, tmp_path):
        path = tmp_path / "trajectory_c2ucb_0_0.csv"
        write_lines(path, [TRAJECTORY_HEADER])
        with pytest.raises(ValueError, match="no data rows"):
            read_trajectory(str(path))


class TestSummary:
    def test_rows_parse(self, tmp_path):
        path = tmp_path / "summary.csv"
        write_lines(
            path,
            [
                SUMMARY_HEADER,
                "c2ucb,1,0.5,12.25,0",
                "c2ucb,10,0.5,14.5,1",
                "greedy,1,nan,3.75,1",
            ],
        )
        rows = read_summary(str(path))
        assert [r.policy for r in rows] == ["c2ucb", "c2ucb", "greedy"]
        assert [r.best for r in rows] == [False, True, True]
        assert rows[1].lam == 10.0
        assert rows[1].mean_cum_reward == 14.5
        assert np.isnan(rows[2].param2)

    def test_wrong_header_names_column(self, tmp_path):
        path = tmp_path / "summary.csv"
        write_lines(path, ["policy,lam,param2,mean_cum_reward,best", "c2ucb,1,1,1,1"])
        with pytest.raises(HeaderMismatchError, match="lambda"):
            read_summary(str(path))


class TestTrajectoryNaming:
    def test_policy_extracted(self):
        assert policy_of_trajectory("/a/b/trajectory_pc2ucb_3_17.csv") == "pc2ucb"

    def test_policy_with_underscore(self):
        assert policy_of_trajectory("trajectory_my_policy_0_0.csv") == "my_policy"

    def test_other_names_rejected(self):
        for name in ("summary.csv", "trajectory_c2ucb_0.csv", "trajectory__0_0.csv"):
            with pytest.raises(ValueError):
                policy_of_trajectory(name)


class TestFeatureTable:
    def test_round_trip(self, tmp_path):
        arr = np.arange(12, dtype=float).reshape(4, 3) / 7.0
        path = tmp_path / "features.bin"
        write_feature_file(path, arr)
        out = read_feature_table(str(path))
        assert out.shape == (4, 3)
        assert np.array_equal(out, arr)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "features.bin"
        write_feature_file(path, np.ones((2, 2)), magic=b"XLSF")
        with pytest.raises(ValueError):
            read_feature_table(str(path))

    def test_bad_version(self, tmp_path):
        path = tmp_path / "features.bin"
        write_feature_file(path, np.ones((2, 2)), version=FEATURE_VERSION + 1)
        with pytest.raises(ValueError):
            read_feature_table(str(path))

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "features.bin"
        write_feature_file(path, np.ones((3, 4)))
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(ValueError):
            read_feature_table(str(path))
