"""Independent reference implementations used as test oracles.

Plain Python, written without reusing the package's kernels, so that
agreement between the two is meaningful.
"""

from __future__ import annotations

import numpy as np

from c2knn.dataset import Dataset

MASK32 = 0xFFFFFFFF


def py_jaccard(p, q) -> float:
    a, b = set(p), set(q)
    union = len(a | b)
    return len(a & b) / union if union else 0.0


def naive_topk(profiles, k, sim=py_jaccard):
    """Double loop over all ordered pairs, then sort by (sim desc, id asc)."""
    out = []
    for u, pu in enumerate(profiles):
        cand = [(sim(pu, pv), v) for v, pv in enumerate(profiles) if v != u]
        cand.sort(key=lambda x: (-x[0], x[1]))
        out.append([(v, s) for s, v in cand[:k]])
    return out


def gather_sort_merge(partials, n_users, k):
    """Collect every (u, v, s) offered by any partial, dedupe, keep top k."""
    pool = [dict() for _ in range(n_users)]
    for g in partials:
        for r in range(g.ids.shape[0]):
            u = int(g.users[r])
            for v, s in zip(g.ids[r].tolist(), g.sims[r].tolist()):
                if v < 0:
                    break
                pool[u].setdefault(v, s)
    out = []
    for u in range(n_users):
        items = sorted(pool[u].items(), key=lambda x: (-x[1], x[0]))
        out.append(items[:k])
    return out


def graph_rows(g):
    """Graph as a list of [(neighbor, sim), ...] per row."""
    return [g.neighbors(r) for r in range(g.n)]


def _rot(x, k):
    return ((x << k) | (x >> (32 - k))) & MASK32


def lookup3_word(key: int, seed: int) -> tuple[int, int]:
    """Bob Jenkins' hashword2 on a single 32-bit word, straight from the
    reference C code (length 1: add the word to ``a``, then ``final``)."""
    pc, pb = seed & MASK32, (seed >> 32) & MASK32
    a = b = c = (0xDEADBEEF + (1 << 2) + pc) & MASK32
    c = (c + pb) & MASK32
    a = (a + key) & MASK32
    c ^= b; c = (c - _rot(b, 14)) & MASK32  # noqa: E702
    a ^= c; a = (a - _rot(c, 11)) & MASK32  # noqa: E702
    b ^= a; b = (b - _rot(a, 25)) & MASK32  # noqa: E702
    c ^= b; c = (c - _rot(b, 16)) & MASK32  # noqa: E702
    a ^= c; a = (a - _rot(c, 4)) & MASK32  # noqa: E702
    b ^= a; b = (b - _rot(a, 14)) & MASK32  # noqa: E702
    c ^= b; c = (c - _rot(b, 24)) & MASK32  # noqa: E702
    return c, b


def sum_edge_jaccard(g, profiles) -> float:
    total = 0.0
    for r in range(g.n):
        u = int(g.users[r])
        for v, _ in g.neighbors(r):
            total += py_jaccard(profiles[u], profiles[v])
    return total


def random_ds(rng: np.random.Generator, n_users: int, n_items: int, max_size: int = 20,
              dup_rate: float = 0.0) -> Dataset:
    profiles = []
    for _ in range(n_users):
        if profiles and rng.random() < dup_rate:
            profiles.append(profiles[rng.integers(len(profiles))])
            continue
        s = int(rng.integers(1, max_size + 1))
        profiles.append(rng.choice(n_items, size=min(s, n_items), replace=False))
    return Dataset.from_profiles(profiles, n_items=n_items)


def random_partials(rng: np.random.Generator, n_users: int, k: int, n_parts: int):
    """Partial graphs over random member subsets, with similarities drawn from
    one symmetric table (coarse values, so ties are common)."""
    from c2knn.graph import KnnGraph

    table = rng.integers(0, 9, size=(n_users, n_users)) / 8.0
    table = np.triu(table, 1)
    table = table + table.T
    parts = []
    for _ in range(n_parts):
        size = int(rng.integers(2, n_users + 1))
        members = np.sort(rng.choice(n_users, size, replace=False))
        ids = np.full((size, k), -1, dtype=np.int32)
        sims = np.zeros((size, k))
        for r, u in enumerate(members):
            cand = sorted(((table[u, v], int(v)) for v in members if v != u),
                          key=lambda x: (-x[0], x[1]))[:k]
            for j, (s, v) in enumerate(cand):
                ids[r, j], sims[r, j] = v, s
        parts.append(KnnGraph(ids, sims, k=k, users=members))
    return parts
