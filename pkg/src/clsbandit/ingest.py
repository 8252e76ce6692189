"""Ratings ingestion: CSV to user feature vectors and a held-out reward table.

Pipeline: parse a (userId, movieId, rating, timestamp) CSV, hold out M test
movies whose rater counts fall in a configured band, factor the remaining
ratings matrix with a randomized truncated SVD, and turn each user's left
singular row (scaled by the singular values, plus a constant coordinate)
into a feature vector.  One global scale puts the largest vector exactly on
the unit sphere.

Both outputs round-trip through little-endian binary formats:

  features  magic "CLSF", u32 version, u32 num_users, u32 d, then
            num_users * d float64 values, row major
  rewards   magic "CLSR", u32 count, then count records of
            (u32 user, u32 movie_slot, f64 reward)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix

FEATURE_MAGIC = b"CLSF"
REWARD_MAGIC = b"CLSR"
FEATURE_VERSION = 1

## Half-step rating grid used by the source data.
_VALID_RATINGS = {x / 2.0 for x in range(1, 11)}


class RatingsFormatError(ValueError):
    """Raised for malformed, off-grid, or duplicated rating lines."""


@dataclass
class RatingsDataset:
    """Parsed ratings in dense-index form.

    user_ids / movie_ids map dense indices back to the raw string ids, in
    first-appearance order.
    """

    user_idx: np.ndarray
    movie_idx: np.ndarray
    ratings: np.ndarray
    user_ids: list[str]
    movie_ids: list[str]

    @property
    def num_ratings(self) -> int:
        return self.user_idx.shape[0]

    @property
    def num_users(self) -> int:
        return len(self.user_ids)

    @property
    def num_movies(self) -> int:
        return len(self.movie_ids)


def parse_ratings(path: str) -> RatingsDataset:
    """Parse a ratings CSV (header line, then userId,movieId,rating,timestamp).

    Errors carry 1-based line numbers.  A (user, movie) pair may appear only
    once; a rating must sit on the half-step grid 0.5 .. 5.0.
    """
    users: dict[str, int] = {}
    movies: dict[str, int] = {}
    seen: dict[tuple[int, int], int] = {}
    u_idx: list[int] = []
    m_idx: list[int] = []
    vals: list[float] = []
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline()
        if not header:
            raise RatingsFormatError(f"{path}: empty file")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise RatingsFormatError(
                    f"{path}:{lineno}: expected 4 comma-separated fields, got {len(parts)}"
                )
            user_raw, movie_raw, rating_raw, _timestamp = parts
            try:
                rating = float(rating_raw)
            except ValueError:
                raise RatingsFormatError(
                    f"{path}:{lineno}: rating {rating_raw!r} is not a number"
                ) from None
            if rating not in _VALID_RATINGS:
                raise RatingsFormatError(
                    f"{path}:{lineno}: rating {rating_raw} is off the half-step grid"
                )
            u = users.setdefault(user_raw, len(users))
            m = movies.setdefault(movie_raw, len(movies))
            prev = seen.get((u, m))
            if prev is not None:
                raise RatingsFormatError(
                    f"{path}:{lineno}: duplicate rating for user {user_raw}, "
                    f"movie {movie_raw} (first at line {prev})"
                )
            seen[(u, m)] = lineno
            u_idx.append(u)
            m_idx.append(m)
            vals.append(rating)
    return RatingsDataset(
        user_idx=np.asarray(u_idx, dtype=np.int64),
        movie_idx=np.asarray(m_idx, dtype=np.int64),
        ratings=np.asarray(vals, dtype=np.float64),
        user_ids=list(users),
        movie_ids=list(movies),
    )


@dataclass
class FeatureBuildReport:
    """What the pipeline chose and how well the factorization fits."""

    test_movies: list[str] = field(default_factory=list)
    test_movie_rater_counts: list[int] = field(default_factory=list)
    rank: int = 0
    explained_energy: float = 0.0
    max_prenorm: float = 0.0


def split_train_test(
    ds: RatingsDataset,
    num_test_movies: int,
    min_raters: int,
    max_raters: int,
    rng: np.random.Generator,
) -> tuple[RatingsDataset, list[int], dict[tuple[int, int], float]]:
    """Hold out `num_test_movies` movies with rater counts inside the band.

    Returns (train dataset, chosen movie dense indices, reward table keyed by
    (user dense index, test-movie slot)).  Every rating of a chosen movie
    moves to the reward table; the train set keeps the rest.  Dense user and
    movie indices are preserved, so feature rows line up across the split.
    """
    counts = np.bincount(ds.movie_idx, minlength=ds.num_movies)
    eligible = np.flatnonzero((counts >= min_raters) & (counts <= max_raters))
    if eligible.shape[0] < num_test_movies:
        raise ValueError(
            f"only {eligible.shape[0]} movies have rater counts in "
            f"[{min_raters}, {max_raters}]; need {num_test_movies}"
        )
    chosen = rng.choice(eligible, size=num_test_movies, replace=False)
    chosen_list = [int(m) for m in chosen]
    slot = {m: s for s, m in enumerate(chosen_list)}
    mask = np.isin(ds.movie_idx, chosen)
    table: dict[tuple[int, int], float] = {}
    for u, m, r in zip(ds.user_idx[mask], ds.movie_idx[mask], ds.ratings[mask]):
        table[(int(u), slot[int(m)])] = float(r)
    train = RatingsDataset(
        user_idx=ds.user_idx[~mask],
        movie_idx=ds.movie_idx[~mask],
        ratings=ds.ratings[~mask],
        user_ids=ds.user_ids,
        movie_ids=ds.movie_ids,
    )
    return train, chosen_list, table


def _randomized_svd(
    A: csr_matrix, rank: int, iters: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Left factors of a randomized truncated SVD: U (m x rank) and s (rank,).

    Subspace iteration with oversampling 10 and a QR re-orthonormalization
    after every multiplication, which keeps the power iterations stable.
    """
    m, n = A.shape
    width = min(rank + 10, min(m, n))
    omega = rng.standard_normal((n, width))
    Y = A @ omega
    Q, _ = np.linalg.qr(Y)
    for _ in range(iters):
        Z, _ = np.linalg.qr(A.T @ Q)
        Q, _ = np.linalg.qr(A @ Z)
    B = (A.T @ Q).T  # Q^T A without densifying A
    Ub, s, _ = np.linalg.svd(B, full_matrices=False)
    U = Q @ Ub
    return U[:, :rank], s[:rank]


def build_user_features(
    train: RatingsDataset,
    rank: int,
    iters: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, FeatureBuildReport]:
    """Factor the train ratings and emit one feature row per dense user index.

    Row u is (U Sigma)[u] with a constant coordinate 1 appended, all rows
    scaled by one global factor so the maximum norm is exactly 1.
    """
    if rank < 1:
        raise ValueError(f"rank must be >= 1, got {rank}")
    if iters < 0:
        raise ValueError(f"iters must be >= 0, got {iters}")
    A = csr_matrix(
        (train.ratings, (train.user_idx, train.movie_idx)),
        shape=(train.num_users, train.num_movies),
    )
    U, s = _randomized_svd(A, rank, iters, rng)
    vecs = np.hstack([U * s, np.ones((train.num_users, 1))])
    norms = np.linalg.norm(vecs, axis=1)
    max_prenorm = float(norms.max())
    vecs /= max_prenorm
    # A single division can leave the extreme row a few ulp above 1.
    top = float(np.linalg.norm(vecs, axis=1).max())
    while top > 1.0:
        vecs /= top
        top = float(np.linalg.norm(vecs, axis=1).max())
    total_energy = float(train.ratings @ train.ratings)
    explained = float(s @ s) / total_energy if total_energy > 0 else 1.0
    report = FeatureBuildReport(
        rank=rank,
        explained_energy=explained,
        max_prenorm=max_prenorm,
    )
    return vecs, report


def ingest_pipeline(
    ds: RatingsDataset,
    num_test_movies: int,
    min_raters: int,
    max_raters: int,
    rank: int,
    iters: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, dict[tuple[int, int], float], FeatureBuildReport]:
    """Split, factor, and report in one pass."""
    counts = np.bincount(ds.movie_idx, minlength=ds.num_movies)
    train, chosen, table = split_train_test(
        ds, num_test_movies, min_raters, max_raters, rng
    )
    features, report = build_user_features(train, rank, iters, rng)
    report.test_movies = [ds.movie_ids[m] for m in chosen]
    report.test_movie_rater_counts = [int(counts[m]) for m in chosen]
    return features, table, report


## ---------------------------------------------------------------------------
## Binary round trips.


def write_feature_table(path: str, features: np.ndarray) -> None:
    features = np.ascontiguousarray(features, dtype="<f8")
    if features.ndim != 2:
        raise ValueError("features must be 2-d")
    num_users, d = features.shape
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<III", FEATURE_VERSION, num_users, d))
        fh.write(features.tobytes(order="C"))


def read_feature_table(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != FEATURE_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        version, num_users, d = struct.unpack("<III", fh.read(12))
        if version != FEATURE_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        data = fh.read(num_users * d * 8)
        if len(data) != num_users * d * 8:
            raise ValueError(f"{path}: truncated feature payload")
    return np.frombuffer(data, dtype="<f8").reshape(num_users, d).copy()


def write_reward_table(path: str, table: dict[tuple[int, int], float]) -> None:
    with open(path, "wb") as fh:
        fh.write(REWARD_MAGIC)
        fh.write(struct.pack("<I", len(table)))
        for (user, slot), reward in sorted(table.items()):
            fh.write(struct.pack("<IId", user, slot, reward))


def read_reward_table(path: str) -> dict[tuple[int, int], float]:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != REWARD_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        (count,) = struct.unpack("<I", fh.read(4))
        table: dict[tuple[int, int], float] = {}
        for _ in range(count):
            payload = fh.read(16)
            if len(payload) != 16:
                raise ValueError(f"{path}: truncated reward payload")
            user, slot, reward = struct.unpack("<IId", payload)
            table[(user, slot)] = reward
    return table


def reward_table_to_dense(
    table: dict[tuple[int, int], float], num_users: int, num_slots: int
) -> np.ndarray:
    """Dense (num_users, num_slots) array; missing entries are 0 (unrated)."""
    dense = np.zeros((num_users, num_slots))
    for (user, slot), reward in table.items():
        if not 0 <= user < num_users or not 0 <= slot < num_slots:
            raise ValueError(f"reward entry ({user}, {slot}) out of range")
        dense[user, slot] = reward
    return dense
