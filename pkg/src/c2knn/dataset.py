"""Rating ingestion, binarization, filtering and k-fold splits."""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

SNAPSHOT_MAGIC = "C2KNN-DATASET"
SNAPSHOT_VERSION = 1


class DatasetError(ValueError):
    pass


class EmptyInput(DatasetError):
    pass


class ParseError(DatasetError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class NoUsers(DatasetError):
    pass


@dataclass(frozen=True, slots=True)
class RatingRecord:
    user: str
    item: str
    rating: float
    timestamp: int | None = None


def _detect_delimiter(line: str) -> str | None:
    for delim in ("::", "\t", ",", ";"):
        if delim in line:
            return delim
    return None  # any whitespace


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def load_ratings(path: str | Path, format: str = "auto") -> list[RatingRecord]:
    """Parse ``user,item,rating[,timestamp]`` lines.

    ``format`` is ``csv``, ``tsv`` or ``auto``; auto-detection looks at the
    first line and also understands MovieLens' ``::`` and whitespace.
    A single header line is skipped when its rating column is non-numeric.
    """
    path = Path(path)
    with open(path, encoding="utf-8", errors="replace") as fh:
        lines = fh.read().splitlines()
    lines_iter = ((no, ln.strip()) for no, ln in enumerate(lines, start=1))
    body = [(no, ln) for no, ln in lines_iter if ln and not ln.startswith("#")]
    if not body:
        raise EmptyInput(f"{path}: no records")

    if format == "csv":
        delim = ","
    elif format == "tsv":
        delim = "\t"
    elif format == "auto":
        delim = _detect_delimiter(body[0][1])
    else:
        raise ValueError(f"unknown format {format!r}")

    first_cols = body[0][1].split(delim)
    if len(first_cols) >= 3 and not _is_number(first_cols[2].strip()):
        body = body[1:]
        if not body:
            raise EmptyInput(f"{path}: header only")

    out = []
    append = out.append
    for no, ln in body:
        cols = ln.split(delim)
        if len(cols) < 3:
            raise ParseError(no, f"expected at least 3 columns, got {len(cols)}")
        user, item = cols[0].strip(), cols[1].strip()
        if not user or not item:
            raise ParseError(no, "empty user or item token")
        try:
            rating = float(cols[2])
        except ValueError:
            raise ParseError(no, f"non-numeric rating {cols[2]!r}") from None
        if not math.isfinite(rating):
            raise ParseError(no, f"non-finite rating {cols[2]!r}")
        ts = None
        if len(cols) > 3 and cols[3].strip():
            try:
                ts = int(float(cols[3]))
            except ValueError:
                raise ParseError(no, f"bad timestamp {cols[3]!r}") from None
        append(RatingRecord(user, item, rating, ts))
    return out


class Dataset:
    """Immutable binarized user profiles in CSR layout.

    ``indptr``/``indices`` hold the sorted, duplicate-free item ids of each
    user; ``user_ids``/``item_ids`` map internal ids back to external tokens.
    """

    def __init__(self, indptr, indices, user_ids: Sequence[str], item_ids: Sequence[str],
                 n_items: int | None = None, dropped_users: int = 0):
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int32)
        self.indptr.flags.writeable = False
        self.indices.flags.writeable = False
        self.user_ids = list(user_ids)
        self.item_ids = list(item_ids)
        self.n_users = len(self.indptr) - 1
        self.n_items = len(self.item_ids) if n_items is None else n_items
        self.dropped_users = dropped_users
        if len(self.user_ids) != self.n_users:
            raise DatasetError("user_ids length does not match profile count")
        self._user_index = None
        self._item_index = None

    @classmethod
    def from_profiles(cls, profiles: Sequence[Iterable[int]], n_items: int | None = None,
                      user_ids=None, item_ids=None) -> "Dataset":
        """Build from internal-id profiles (sorted and deduplicated here)."""
        rows = [np.unique(np.asarray(list(p), dtype=np.int64)) for p in profiles]
        lengths = np.array([r.size for r in rows], dtype=np.int64)
        indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        np.cumsum(lengths, out=indptr[1:])
        indices = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
        if n_items is None:
            n_items = int(indices.max()) + 1 if indices.size else 0
        if indices.size and (indices.min() < 0 or indices.max() >= n_items):
            raise DatasetError("item id out of range")
        if user_ids is None:
            user_ids = [str(u) for u in range(len(rows))]
        if item_ids is None:
            item_ids = [str(i) for i in range(n_items)]
        return cls(indptr, indices, user_ids, item_ids, n_items=n_items)

    def profile(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    @property
    def profiles(self) -> list[np.ndarray]:
        return [self.profile(u) for u in range(self.n_users)]

    @property
    def profile_sizes(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def n_ratings(self) -> int:
        return int(self.indices.size)

    def user_index(self, ext: str) -> int:
        if self._user_index is None:
            self._user_index = {e: i for i, e in enumerate(self.user_ids)}
        return self._user_index[ext]

    def item_index(self, ext: str) -> int:
        if self._item_index is None:
            self._item_index = {e: i for i, e in enumerate(self.item_ids)}
        return self._item_index[ext]

    def with_profiles(self, indptr, indices) -> "Dataset":
        """Same id space, different profiles (used for train folds)."""
        return Dataset(indptr, indices, self.user_ids, self.item_ids, n_items=self.n_items)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.n_items == other.n_items
                and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices)
                and self.user_ids == other.user_ids
                and self.item_ids == other.item_ids)

    def __repr__(self):
        return (f"Dataset(n_users={self.n_users}, n_items={self.n_items}, "
                f"n_ratings={self.n_ratings})")

    def stats(self) -> dict:
        sizes = self.profile_sizes
        n, m = self.n_users, self.n_items
        return {
            "users": n,
            "items": m,
            "ratings": self.n_ratings,
            "mean_profile": float(sizes.mean()) if n else 0.0,
            "mean_item_degree": self.n_ratings / m if m else 0.0,
            "density": self.n_ratings / (n * m) if n and m else 0.0,
        }

    # snapshot format: text, one header line, one counts line, then one line
    # per item id and one line per user ("ext_id<TAB>item item ...").
    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"{SNAPSHOT_MAGIC} v{SNAPSHOT_VERSION}\n")
            fh.write(f"{self.n_users} {self.n_items} {self.n_ratings}\n")
            for ext in self.item_ids:
                fh.write(f"{ext}\n")
            for u in range(self.n_users):
                items = " ".join(map(str, self.profile(u).tolist()))
                fh.write(f"{self.user_ids[u]}\t{items}\n")

    @classmethod
    def load(cls, path: str | Path) -> "Dataset":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n")
            if not header.startswith(SNAPSHOT_MAGIC):
                raise DatasetError(f"{path}: not a dataset snapshot")
            version = int(header.split("v")[-1])
            if version != SNAPSHOT_VERSION:
                raise DatasetError(f"{path}: unsupported snapshot version {version}")
            n, m, _ = (int(x) for x in fh.readline().split())
            item_ids = [fh.readline().rstrip("\n") for _ in range(m)]
            user_ids, rows = [], []
            for _ in range(n):
                ext, _, items = fh.readline().rstrip("\n").partition("\t")
                user_ids.append(ext)
                rows.append(np.array(items.split(), dtype=np.int64))
        lengths = np.array([r.size for r in rows], dtype=np.int64)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(lengths, out=indptr[1:])
        indices = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
        return cls(indptr, indices, user_ids, item_ids, n_items=m)


def is_snapshot(path: str | Path) -> bool:
    with open(path, encoding="utf-8", errors="replace") as fh:
        return fh.readline().startswith(SNAPSHOT_MAGIC)


def binarize_and_filter(records: Sequence[RatingRecord], positive_threshold: float = 3.0,
                        min_profile: int = 20) -> Dataset:
    """Keep users with at least ``min_profile`` raw ratings, then keep their
    ratings strictly above ``positive_threshold``.

    Users left with an empty profile are dropped. Internal ids follow first
    appearance among the surviving positive ratings.
    """
    if min_profile < 1:
        raise ValueError("min_profile must be >= 1")
    raw_counts = Counter(r.user for r in records)
    user_map: dict[str, int] = {}
    item_map: dict[str, int] = {}
    profiles: list[set[int]] = []
    for r in records:
        if raw_counts[r.user] < min_profile or not r.rating > positive_threshold:
            continue
        u = user_map.get(r.user)
        if u is None:
            u = user_map[r.user] = len(profiles)
            profiles.append(set())
        i = item_map.get(r.item)
        if i is None:
            i = item_map[r.item] = len(item_map)
        profiles[u].add(i)
    eligible = sum(1 for c in raw_counts.values() if c >= min_profile)
    if not profiles:
        raise NoUsers(
            f"no users survive filtering (threshold={positive_threshold}, "
            f"min_profile={min_profile})")
    dropped = eligible - len(profiles)
    if dropped:
        log.info("dropped %d users with empty binarized profiles", dropped)
    ds = Dataset.from_profiles([sorted(p) for p in profiles], n_items=len(item_map),
                               user_ids=list(user_map), item_ids=list(item_map))
    ds.dropped_users = dropped
    return ds


@dataclass(frozen=True)
class FoldSplit:
    fold: int
    fold_count: int
    train: Dataset
    test: list[np.ndarray]

    def test_items(self, u: int) -> np.ndarray:
        return self.test[u]


def make_folds(ds: Dataset, fold_count: int = 5, seed: int = 0) -> list[FoldSplit]:
    """Per-user random partition of items into ``fold_count`` parts.

    Profiles smaller than ``fold_count`` stay entirely in train.
    """
    if fold_count < 2:
        raise ValueError(f"fold_count must be >= 2, got {fold_count}")
    rng = np.random.default_rng(np.random.SeedSequence([seed & (2**63 - 1), 0xF01D]))
    part_of = np.full(ds.n_ratings, -1, dtype=np.int64)
    for u in range(ds.n_users):
        lo, hi = ds.indptr[u], ds.indptr[u + 1]
        size = hi - lo
        if size < fold_count:
            continue
        perm = rng.permutation(size)
        part_of[lo + perm] = np.arange(size) % fold_count
    user_of = np.repeat(np.arange(ds.n_users), ds.profile_sizes)
    folds = []
    for f in range(fold_count):
        keep = part_of != f
        counts = np.bincount(user_of[keep], minlength=ds.n_users)
        indptr = np.zeros(ds.n_users + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        train = ds.with_profiles(indptr, ds.indices[keep])
        held = ~keep
        test_idx = ds.indices[held]
        test_users = user_of[held]
        bounds = np.searchsorted(test_users, np.arange(ds.n_users + 1))
        test = [test_idx[bounds[u]:bounds[u + 1]].copy() for u in range(ds.n_users)]
        folds.append(FoldSplit(f, fold_count, train, test))
    return folds
