"""Seeded item hashes, FastRandomHash and MinHash.

Every hash in the package is derived from one master seed. Item hashes use
Bob Jenkins' lookup3 final mix on 32-bit words; the per-function seeds are
derived from the master seed with splitmix64, one namespace per purpose so
that clustering, MinHash and GoldFinger bits never share a function.

Bucket values are 1-based (``1..b``) at every public interface.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numba
import numpy as np

MASK64 = (1 << 64) - 1

# seed namespaces
NS_FRH = 1
NS_MINHASH = 2
NS_GOLDFINGER = 3
NS_RNG = 4

# bucket tables are int32
MAX_BUCKETS = 2**31 - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, namespace: int, index: int = 0) -> int:
    """Deterministic 64-bit seed for function ``index`` of ``namespace``."""
    base = splitmix64((master_seed & MASK64) ^ splitmix64(namespace))
    return splitmix64((base + index) & MASK64)


def _rot(x, k):
    return (x << np.uint32(k)) | (x >> np.uint32(32 - k))


def jenkins_hash(keys, seed: int):
    """lookup3 ``hashword2`` of single 32-bit keys.

    Returns the two output words ``(c, b)`` as uint32 arrays; ``c`` is the
    primary hash, ``c << 32 | b`` gives a 64-bit value.
    """
    keys = np.asarray(keys).astype(np.uint32, copy=False)
    pc = np.uint32(seed & 0xFFFFFFFF)
    pb = np.uint32((seed >> 32) & 0xFFFFFFFF)
    with np.errstate(over="ignore"):
        init = np.uint32((0xDEADBEEF + (1 << 2) + int(pc)) & 0xFFFFFFFF)
        a = np.full(keys.shape, init, dtype=np.uint32)
        b = a.copy()
        c = a + pb
        a = a + keys
        c ^= b
        c -= _rot(b, 14)
        a ^= c
        a -= _rot(c, 11)
        b ^= a
        b -= _rot(a, 25)
        c ^= b
        c -= _rot(b, 16)
        a ^= c
        a -= _rot(c, 4)
        b ^= a
        b -= _rot(a, 14)
        c ^= b
        c -= _rot(b, 24)
    return c, b


def bucket_of(h32, b: int):
    """Multiply-shift reduction of 32-bit hashes onto ``1..b``."""
    h = np.asarray(h32, dtype=np.uint64)
    return ((h * np.uint64(b)) >> np.uint64(32)).astype(np.int64) + 1


@dataclass(frozen=True)
class HashFamily:
    """``t`` generative functions mapping items onto ``1..b``.

    ``table`` optionally pins the item->bucket assignment explicitly (shape
    ``(t, n_items)``, values in ``1..b``); used for hand-built examples.
    """

    t: int
    b: int
    master_seed: int = 0
    table: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.t < 1:
            raise ValueError(f"t must be >= 1, got {self.t}")
        if not 1 <= self.b <= MAX_BUCKETS:
            raise ValueError(f"b must lie in 1..{MAX_BUCKETS}, got {self.b}")
        if self.table is not None:
            tab = np.ascontiguousarray(self.table, dtype=np.int32)
            if tab.ndim != 2 or tab.shape[0] != self.t:
                raise ValueError("explicit table must have shape (t, n_items)")
            if tab.size and (tab.min() < 1 or tab.max() > self.b):
                raise ValueError("explicit table values must lie in 1..b")
            object.__setattr__(self, "table", tab)

    @classmethod
    def from_table(cls, table: Sequence[Sequence[int]], b: int) -> "HashFamily":
        tab = np.asarray(table, dtype=np.int32)
        if tab.ndim == 1:
            tab = tab[None, :]
        return cls(t=tab.shape[0], b=b, table=tab)

    def seed(self, func: int) -> int:
        return derive_seed(self.master_seed, NS_FRH, func)

    def bucket_table(self, n_items: int) -> np.ndarray:
        """Item buckets for every function, shape ``(t, n_items)``, 1-based."""
        if self.table is not None:
            if self.table.shape[1] < n_items:
                raise ValueError("explicit table does not cover all items")
            return self.table[:, :n_items]
        items = np.arange(n_items, dtype=np.uint32)
        out = np.empty((self.t, n_items), dtype=np.int32)
        for f in range(self.t):
            c, _ = jenkins_hash(items, self.seed(f))
            out[f] = bucket_of(c, self.b)
        return out


def item_hash(i: int, func: int, family: HashFamily) -> int:
    if not 0 <= func < family.t:
        raise IndexError(f"function index {func} out of range for t={family.t}")
    if family.table is not None:
        return int(family.table[func, i])
    c, _ = jenkins_hash(np.array([i]), family.seed(func))
    return int(bucket_of(c, family.b)[0])


def frh(
    profile: Iterable[int],
    func: int,
    family: HashFamily,
    excl: Sequence[int] = (),
) -> Optional[int]:
    """FastRandomHash of one profile, ignoring buckets up to ``max(excl)``.

    Returns None when no item hashes above the exclusion bound.
    """
    items = np.fromiter(profile, dtype=np.int64)
    if items.size == 0:
        raise ValueError("profile must be non-empty")
    if family.table is not None:
        hs = family.table[func, items]
    else:
        c, _ = jenkins_hash(items, family.seed(func))
        hs = bucket_of(c, family.b)
    bound = max(excl) if len(excl) else 0
    hs = hs[hs > bound]
    if hs.size == 0:
        return None
    return int(hs.min())


@numba.njit(nogil=True, cache=True)
def frh_bounded(indptr, indices, users, row, bound):
    """Min bucket above ``bound`` for each user in ``users``; 0 means absent."""
    out = np.zeros(users.shape[0], dtype=np.int32)
    for j in range(users.shape[0]):
        u = users[j]
        best = 0
        for p in range(indptr[u], indptr[u + 1]):
            h = row[indices[p]]
            if h > bound and (best == 0 or h < best):
                best = h
        out[j] = best
    return out


@numba.njit(nogil=True, cache=True)
def frh_all(indptr, indices, row):
    n = indptr.shape[0] - 1
    out = np.empty(n, dtype=np.int32)
    for u in range(n):
        best = np.iinfo(np.int32).max
        for p in range(indptr[u], indptr[u + 1]):
            h = row[indices[p]]
            if h < best:
                best = h
        out[u] = best
    return out


# MinHash: full 64-bit hashes stand in for random permutations of the items.

def minhash_seed(master_seed: int, func: int) -> int:
    return derive_seed(master_seed, NS_MINHASH, func)


def minhash_table(n_items: int, t: int, master_seed: int) -> np.ndarray:
    items = np.arange(n_items, dtype=np.uint32)
    out = np.empty((t, n_items), dtype=np.uint64)
    for f in range(t):
        c, b = jenkins_hash(items, minhash_seed(master_seed, f))
        out[f] = (c.astype(np.uint64) << np.uint64(32)) | b.astype(np.uint64)
    return out


def minhash(profile: Iterable[int], func: int, master_seed: int) -> int:
    items = np.fromiter(profile, dtype=np.int64)
    if items.size == 0:
        raise ValueError("profile must be non-empty")
    c, b = jenkins_hash(items, minhash_seed(master_seed, func))
    full = (c.astype(np.uint64) << np.uint64(32)) | b.astype(np.uint64)
    return int(full.min())


@numba.njit(nogil=True, cache=True)
def minhash_all(indptr, indices, row):
    n = indptr.shape[0] - 1
    out = np.empty(n, dtype=np.uint64)
    for u in range(n):
        best = np.uint64(0xFFFFFFFFFFFFFFFF)
        for p in range(indptr[u], indptr[u + 1]):
            h = row[indices[p]]
            if h < best:
                best = h
        out[u] = best
    return out
