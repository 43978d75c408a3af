"""KNN graph storage: fixed-width neighbor rows kept sorted by
(similarity desc, neighbor id asc), padded with -1."""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Sequence

import numba
import numpy as np

BINARY_MAGIC = b"C2KNNGR"
BINARY_VERSION = 1


@numba.njit(nogil=True, cache=True)
def row_add(ids, sims, r, v, s):
    """Offer ``(v, s)`` to row ``r``. Returns 1 if the row changed.

    Rows are bounded top-k lists; duplicates are ignored.
    """
    k = ids.shape[1]
    last = ids[r, k - 1]
    if last >= 0:
        ls = sims[r, k - 1]
        if s < ls or (s == ls and v > last):
            return 0
    pos = k
    for j in range(k):
        w = ids[r, j]
        if w < 0:
            pos = j
            break
        if w == v:
            return 0
        ws = sims[r, j]
        if s > ws or (s == ws and v < w):
            pos = j
            break
    if pos == k:
        return 0
    # v may still be present further down the row
    for j in range(pos, k):
        w = ids[r, j]
        if w < 0:
            break
        if w == v:
            return 0
    for j in range(k - 1, pos, -1):
        ids[r, j] = ids[r, j - 1]
        sims[r, j] = sims[r, j - 1]
    ids[r, pos] = v
    sims[r, pos] = s
    return 1


def empty_rows(n: int, k: int):
    return np.full((n, k), -1, dtype=np.int32), np.zeros((n, k), dtype=np.float64)


class KnnGraph:
    """Neighborhoods of ``users`` (global ids, one row each).

    ``ids[r]`` / ``sims[r]`` hold the neighbors of ``users[r]``; a full
    dataset graph has ``users == arange(n)``.
    """

    def __init__(self, ids, sims, k: int | None = None, users=None):
        self.ids = np.ascontiguousarray(ids, dtype=np.int32)
        self.sims = np.ascontiguousarray(sims, dtype=np.float64)
        self.k = self.ids.shape[1] if k is None else k
        if users is None:
            users = np.arange(self.ids.shape[0])
        self.users = np.ascontiguousarray(users, dtype=np.int64)

    @classmethod
    def empty(cls, n: int, k: int) -> "KnnGraph":
        return cls(*empty_rows(n, k), k=k)

    @property
    def n(self) -> int:
        return self.ids.shape[0]

    def degree(self, r: int) -> int:
        return int(np.count_nonzero(self.ids[r] >= 0))

    def degrees(self) -> np.ndarray:
        return np.count_nonzero(self.ids >= 0, axis=1)

    def neighbors(self, r: int) -> list[tuple[int, float]]:
        d = self.degree(r)
        return list(zip(self.ids[r, :d].tolist(), self.sims[r, :d].tolist()))

    def n_edges(self) -> int:
        return int(np.count_nonzero(self.ids >= 0))

    def validate(self) -> None:
        """Raise AssertionError if any row breaks the graph invariants."""
        for r in range(self.n):
            u = self.users[r]
            d = self.degree(r)
            row, s = self.ids[r], self.sims[r]
            assert np.all(row[d:] < 0), f"row {r}: gap inside neighbor list"
            assert not np.any(row[:d] == u), f"user {u} is its own neighbor"
            assert len(set(row[:d].tolist())) == d, f"user {u}: duplicate neighbors"
            for j in range(d - 1):
                ok = s[j] > s[j + 1] or (s[j] == s[j + 1] and row[j] < row[j + 1])
                assert ok, f"user {u}: row not sorted at {j}"

    def __eq__(self, other):
        if not isinstance(other, KnnGraph):
            return NotImplemented
        return (self.k == other.k and np.array_equal(self.users, other.users)
                and np.array_equal(self.ids, other.ids)
                and np.array_equal(self.sims, other.sims))

    def __repr__(self):
        return f"KnnGraph(n={self.n}, k={self.k}, edges={self.n_edges()})"

    # ---- serialization -------------------------------------------------

    def write_text(self, path: str | Path, user_ids: Sequence[str] | None = None) -> None:
        """One line per user: ``user<TAB>nbr:sim,nbr:sim`` with 6-decimal sims."""
        name = (lambda x: user_ids[x]) if user_ids is not None else str
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for r in range(self.n):
                d = self.degree(r)
                cells = ",".join(f"{name(int(v))}:{s:.6f}"
                                 for v, s in zip(self.ids[r, :d], self.sims[r, :d]))
                fh.write(f"{name(int(self.users[r]))}\t{cells}\n")

    def write_binary(self, path: str | Path) -> None:
        """Magic, version, then n/k and little-endian users, ids, sims arrays."""
        with open(path, "wb") as fh:
            fh.write(BINARY_MAGIC)
            fh.write(struct.pack("<BQQ", BINARY_VERSION, self.n, self.k))
            fh.write(self.users.astype("<i8").tobytes())
            fh.write(self.ids.astype("<i4").tobytes())
            fh.write(self.sims.astype("<f8").tobytes())

    @classmethod
    def read_binary(cls, path: str | Path) -> "KnnGraph":
        with open(path, "rb") as fh:
            if fh.read(len(BINARY_MAGIC)) != BINARY_MAGIC:
                raise ValueError(f"{path}: not a binary KNN graph")
            version, n, k = struct.unpack("<BQQ", fh.read(17))
            if version != BINARY_VERSION:
                raise ValueError(f"{path}: unsupported graph version {version}")
            users = np.frombuffer(fh.read(8 * n), dtype="<i8")
            ids = np.frombuffer(fh.read(4 * n * k), dtype="<i4").reshape(n, k)
            sims = np.frombuffer(fh.read(8 * n * k), dtype="<f8").reshape(n, k)
        return cls(ids.copy(), sims.copy(), k=k, users=users.copy())

    @classmethod
    def read_text(cls, path: str | Path, user_index=None, k: int | None = None) -> "KnnGraph":
        """Inverse of :meth:`write_text`; sims are read back at 6 decimals."""
        look = user_index if user_index is not None else int
        rows = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                head, _, rest = line.rstrip("\n").partition("\t")
                nbrs = []
                for cell in filter(None, rest.split(",")):
                    v, _, s = cell.rpartition(":")
                    nbrs.append((look(v), float(s)))
                rows.append((look(head), nbrs))
        width = k if k is not None else max((len(r[1]) for r in rows), default=1)
        ids, sims = empty_rows(len(rows), max(width, 1))
        users = np.empty(len(rows), dtype=np.int64)
        for r, (u, nbrs) in enumerate(rows):
            users[r] = u
            for j, (v, s) in enumerate(nbrs):
                ids[r, j], sims[r, j] = v, s
        order = np.argsort(users, kind="stable")
        return cls(ids[order], sims[order], k=width, users=users[order])


def read_graph(path: str | Path, user_index=None) -> KnnGraph:
    with open(path, "rb") as fh:
        magic = fh.read(len(BINARY_MAGIC))
    if magic == BINARY_MAGIC:
        return KnnGraph.read_binary(path)
    return KnnGraph.read_text(path, user_index=user_index)
