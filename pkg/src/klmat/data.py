"""MovieLens ingestion and deterministic train/test splitting."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, EmptyDataset, ParseError

logger = logging.getLogger(__name__)

FORMATS = ("csv_small", "dat_1m")


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RatingsDataset:
    """Observed (user, item, rating) triplets over a contiguous index space.

    ``user_ids[u]`` and ``item_ids[j]`` give the external identifier of the
    internal index; ``user_index``/``item_index`` are the inverse maps.
    Train/test views share the index maps and ``r_max`` of their source.
    """

    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    user_ids: tuple
    item_ids: tuple
    r_max: float
    duplicates_dropped: int = 0
    user_index: dict = field(init=False, repr=False)
    item_index: dict = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "users", _readonly(np.asarray(self.users, dtype=np.int64)))
        object.__setattr__(self, "items", _readonly(np.asarray(self.items, dtype=np.int64)))
        object.__setattr__(self, "ratings", _readonly(np.asarray(self.ratings, dtype=np.float64)))
        object.__setattr__(self, "user_index", {u: i for i, u in enumerate(self.user_ids)})
        object.__setattr__(self, "item_index", {v: j for j, v in enumerate(self.item_ids)})

    @property
    def num_users(self) -> int:
        return len(self.user_ids)

    @property
    def num_items(self) -> int:
        return len(self.item_ids)

    def __len__(self) -> int:
        return len(self.ratings)

    def triplets(self):
        return list(zip(self.users.tolist(), self.items.tolist(), self.ratings.tolist()))

    def subset(self, mask) -> "RatingsDataset":
        """View restricted to the triplets selected by ``mask`` (same index maps)."""
        return RatingsDataset(
            self.users[mask],
            self.items[mask],
            self.ratings[mask],
            self.user_ids,
            self.item_ids,
            self.r_max,
        )

    @classmethod
    def from_triplets(cls, triplets, r_max=None) -> "RatingsDataset":
        """Build a dataset from ``(user_id, item_id, rating)`` tuples.

        Ids are re-indexed in first-appearance order. A repeated
        (user, item) pair keeps its last rating.
        """
        user_index: dict = {}
        item_index: dict = {}
        pairs: dict = {}
        duplicates = 0
        for uid, iid, rating in triplets:
            u = user_index.setdefault(uid, len(user_index))
            j = item_index.setdefault(iid, len(item_index))
            if (u, j) in pairs:
                duplicates += 1
            pairs[(u, j)] = float(rating)
        if not pairs:
            raise EmptyDataset("no ratings")
        if duplicates:
            logger.warning("dropped %d duplicate (user, item) ratings, kept last", duplicates)
        keys = np.array(list(pairs.keys()), dtype=np.int64)
        ratings = np.fromiter(pairs.values(), dtype=np.float64, count=len(pairs))
        if np.any(ratings <= 0) or not np.all(np.isfinite(ratings)):
            raise ParseError("ratings must be finite and > 0")
        top = float(ratings.max())
        if r_max is not None:
            if ratings.max() > r_max:
                raise ParseError(f"rating {top} exceeds r_max {r_max}")
            top = float(r_max)
        return cls(
            keys[:, 0],
            keys[:, 1],
            ratings,
            tuple(user_index),
            tuple(item_index),
            top,
            duplicates,
        )


@dataclass(frozen=True)
class Split:
    train: RatingsDataset
    test: RatingsDataset
    seed: int
    ratio: float


def _parse_lines(lines, sep, start):
    for lineno, raw in enumerate(lines, start=start):
        line = raw.strip()
        if not line:
            continue
        parts = line.split(sep)
        if len(parts) != 4:
            raise ParseError(f"expected 4 fields, got {len(parts)}: {line!r}", lineno)
        try:
            yield int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError as exc:
            raise ParseError(f"{exc}: {line!r}", lineno) from None


def load_movielens(path, format="csv_small") -> RatingsDataset:
    """Load a MovieLens ratings file.

    Parameters
    ----------
    path : str or Path
        ``ratings.csv`` (``csv_small``: header, ``userId,movieId,rating,timestamp``)
        or ``ratings.dat`` (``dat_1m``: ``UserID::MovieID::Rating::Timestamp``).
    format : {"csv_small", "dat_1m"}
        Hyphenated spellings are accepted as well.
    """
    fmt = format.replace("-", "_")
    if fmt not in FORMATS:
        raise ConfigError(f"unknown format {format!r}; expected one of {FORMATS}")
    with open(Path(path), encoding="utf-8") as fh:
        lines = fh.readlines()
    if fmt == "csv_small":
        if not lines or not lines[0].strip():
            raise EmptyDataset(f"{path}: empty file")
        header = lines[0].strip().lower()
        if not header.startswith("userid"):
            raise ParseError(f"missing header, got {lines[0].strip()!r}", 1)
        rows = _parse_lines(lines[1:], ",", 2)
    else:
        rows = _parse_lines(lines, "::", 1)
    try:
        return RatingsDataset.from_triplets(rows)
    except EmptyDataset:
        raise EmptyDataset(f"{path}: no ratings") from None


def split_dataset(ds: RatingsDataset, ratio: float = 0.9, seed: int = 0) -> Split:
    """Assign each triplet to train with probability ``ratio``, seeded."""
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"split ratio must lie in (0, 1), got {ratio}")
    rng = np.random.default_rng(seed)
    in_train = rng.random(len(ds)) < ratio
    return Split(ds.subset(in_train), ds.subset(~in_train), seed, ratio)
