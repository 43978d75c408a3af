"""Exact Jaccard similarity and GoldFinger bit-signature estimates.

Kernels take the dataset's CSR arrays (exact mode) or a packed signature
matrix (GoldFinger mode) so the solvers can stay agnostic of the mode.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numba
import numpy as np

from .hashing import NS_GOLDFINGER, derive_seed, jenkins_hash

EXACT = 0
GOLDFINGER = 1

DEFAULT_GF_BITS = 1024


@numba.njit(nogil=True, cache=True, inline="always")
def _intersect_sorted(a, alo, ahi, b, blo, bhi):
    i, j, n = alo, blo, 0
    while i < ahi and j < bhi:
        x, y = a[i], b[j]
        if x == y:
            n += 1
            i += 1
            j += 1
        elif x < y:
            i += 1
        else:
            j += 1
    return n


@numba.njit(nogil=True, cache=True, inline="always")
def _popcount64(x):
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (x * np.uint64(0x0101010101010101)) >> np.uint64(56)


@numba.njit(nogil=True, cache=True)
def jaccard_csr(indptr, indices, u, v):
    lu = indptr[u + 1] - indptr[u]
    lv = indptr[v + 1] - indptr[v]
    inter = _intersect_sorted(indices, indptr[u], indptr[u + 1], indices, indptr[v], indptr[v + 1])
    union = lu + lv - inter
    if union == 0:
        return 0.0
    return inter / union


@numba.njit(nogil=True, cache=True)
def gf_jaccard_rows(words, pops, u, v):
    inter = 0
    for w in range(words.shape[1]):
        inter += _popcount64(words[u, w] & words[v, w])
    union = pops[u] + pops[v] - inter
    if union == 0:
        return 0.0
    return inter / union


@numba.njit(nogil=True, cache=True)
def pair_sim(mode, indptr, indices, words, pops, u, v):
    if mode == 0:
        return jaccard_csr(indptr, indices, u, v)
    return gf_jaccard_rows(words, pops, u, v)


@numba.njit(nogil=True, cache=True)
def pair_sims(mode, indptr, indices, words, pops, us, vs, out):
    for p in range(us.shape[0]):
        out[p] = pair_sim(mode, indptr, indices, words, pops, us[p], vs[p])


def jaccard(p, q) -> float:
    """Exact Jaccard of two sorted duplicate-free profiles; 0 when both are empty."""
    a = np.ascontiguousarray(p, dtype=np.int64)
    b = np.ascontiguousarray(q, dtype=np.int64)
    inter = _intersect_sorted(a, 0, a.size, b, 0, b.size)
    union = a.size + b.size - inter
    return inter / union if union else 0.0


def _check_width(L: int) -> None:
    if L < 64 or L & (L - 1):
        raise ValueError(f"signature width must be a power of two >= 64, got {L}")


def gf_bit_positions(items, L: int, seed: int) -> np.ndarray:
    c, _ = jenkins_hash(np.asarray(items), derive_seed(seed, NS_GOLDFINGER))
    return (c & np.uint32(L - 1)).astype(np.int64)


@dataclass(frozen=True)
class GoldFingerSig:
    bits: np.ndarray  # uint64 words, little-endian bit order within a word
    popcount: int

    @property
    def width(self) -> int:
        return self.bits.size * 64

    def set_bits(self) -> np.ndarray:
        unpacked = np.unpackbits(self.bits.view(np.uint8), bitorder="little")
        return np.flatnonzero(unpacked)


def gf_encode(p, L: int = DEFAULT_GF_BITS, seed: int = 0) -> GoldFingerSig:
    _check_width(L)
    items = np.asarray(p)
    if items.size == 0:
        raise ValueError("profile must be non-empty")
    pos = gf_bit_positions(items, L, seed)
    words = np.zeros(L // 64, dtype=np.uint64)
    np.bitwise_or.at(words, pos >> 6, np.uint64(1) << (pos & 63).astype(np.uint64))
    pop = int(np.unpackbits(words.view(np.uint8)).sum())
    return GoldFingerSig(words, pop)


def gf_jaccard(a: GoldFingerSig, b: GoldFingerSig) -> float:
    if a.bits.size != b.bits.size:
        raise ValueError(f"signature widths differ: {a.width} vs {b.width}")
    inter = int(np.unpackbits((a.bits & b.bits).view(np.uint8)).sum())
    union = a.popcount + b.popcount - inter
    return inter / union if union else 0.0


def gf_matrix(indptr, indices, n_items: int, L: int = DEFAULT_GF_BITS, seed: int = 0):
    """Signatures for every profile of a CSR dataset: ``(words, popcounts)``."""
    _check_width(L)
    n = len(indptr) - 1
    item_pos = gf_bit_positions(np.arange(n_items), L, seed)
    words = np.zeros((n, L // 64), dtype=np.uint64)
    users = np.repeat(np.arange(n), np.diff(indptr))
    pos = item_pos[indices]
    np.bitwise_or.at(words, (users, pos >> 6), np.uint64(1) << (pos & 63).astype(np.uint64))
    pops = np.unpackbits(words.view(np.uint8), axis=1).sum(axis=1).astype(np.int64)
    return words, pops


class SimilarityOracle:
    """Pairwise similarity over one dataset with an invocation counter.

    ``mode`` is ``"exact"`` (Jaccard on profiles) or ``"goldfinger"``.
    Kernels read :attr:`args` directly and report how many pairs they
    evaluated through :meth:`add_calls`.
    """

    def __init__(self, ds, mode: str = "goldfinger", bits: int = DEFAULT_GF_BITS, seed: int = 0):
        if mode not in ("exact", "goldfinger"):
            raise ValueError(f"unknown similarity mode {mode!r}")
        self.ds = ds
        self.mode = mode
        self.bits = bits
        self._lock = threading.Lock()
        self.calls = 0
        if mode == "goldfinger":
            words, pops = gf_matrix(ds.indptr, ds.indices, ds.n_items, bits, seed)
            self.args = (GOLDFINGER, ds.indptr, ds.indices, words, pops)
        else:
            self.args = (EXACT, ds.indptr, ds.indices,
                         np.zeros((1, 1), dtype=np.uint64), np.zeros(1, dtype=np.int64))

    @property
    def n_users(self) -> int:
        return self.ds.n_users

    def add_calls(self, n: int) -> None:
        with self._lock:
            self.calls += int(n)

    def __call__(self, u: int, v: int) -> float:
        self.add_calls(1)
        return pair_sim(*self.args, u, v)

    def many(self, us, vs) -> np.ndarray:
        us = np.ascontiguousarray(us, dtype=np.int64)
        vs = np.ascontiguousarray(vs, dtype=np.int64)
        out = np.empty(us.size, dtype=np.float64)
        pair_sims(*self.args, us, vs, out)
        self.add_calls(us.size)
        return out
