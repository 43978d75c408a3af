"""Per-cluster KNN solvers: exhaustive brute force and greedy refinement.

Both run over a sorted list of global user ids and return a
:class:`~c2knn.graph.KnnGraph` whose rows follow that order. Greedy solvers
work on local indices internally; since members are sorted, local order
agrees with global order and tie-breaking is unaffected.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .graph import KnnGraph, row_add
from .similarity import SimilarityOracle, pair_sim, pair_sims

log = logging.getLogger(__name__)

HYREC = "hyrec"
NNDESCENT = "nndescent"


@numba.njit(nogil=True, cache=True)
def _brute_force(members, k, mode, indptr, indices, words, pops):
    s = members.shape[0]
    ids = np.full((s, k), -1, dtype=np.int32)
    sims = np.zeros((s, k), dtype=np.float64)
    for i in range(s):
        u = members[i]
        for j in range(i + 1, s):
            v = members[j]
            x = pair_sim(mode, indptr, indices, words, pops, u, v)
            row_add(ids, sims, i, v, x)
            row_add(ids, sims, j, u, x)
    return ids, sims


def _as_members(users, n_users: int) -> np.ndarray:
    members = np.unique(np.asarray(users, dtype=np.int64))
    if members.size != len(users):
        raise ValueError("user list contains duplicates")
    if members.size and (members[0] < 0 or members[-1] >= n_users):
        raise ValueError(f"user ids must lie in 0..{n_users - 1}")
    return members


def brute_force_knn(users, oracle: SimilarityOracle, k: int) -> KnnGraph:
    """Exact top-k within ``users``; evaluates every unordered pair once."""
    members = _as_members(users, oracle.n_users)
    s = members.size
    if s < 2:
        raise ValueError(f"brute force needs at least 2 users, got {s}")
    ids, sims = _brute_force(members, k, *oracle.args)
    oracle.add_calls(s * (s - 1) // 2)
    return KnnGraph(ids, sims, k=k, users=members)


@numba.njit(nogil=True, cache=True)
def _random_init(members, k, seed, mode, indptr, indices, words, pops):
    np.random.seed(seed)
    s = members.shape[0]
    ids = np.full((s, k), -1, dtype=np.int32)
    sims = np.zeros((s, k), dtype=np.float64)
    keys = np.empty(s * k, dtype=np.int64)
    mark = np.full(s, -1, dtype=np.int64)
    c = 0
    for u in range(s):
        mark[u] = u
        got = 0
        while got < k:
            w = np.random.randint(0, s)
            if mark[w] == u:
                continue
            mark[w] = u
            got += 1
            x = pair_sim(mode, indptr, indices, words, pops, members[u], members[w])
            row_add(ids, sims, u, w, x)
            a, b = (u, w) if u < w else (w, u)
            keys[c] = a * s + b
            c += 1
    return ids, sims, keys


@numba.njit(nogil=True, cache=True)
def _hyrec_candidates(ids):
    s, k = ids.shape
    keys = np.empty(s * k * k, dtype=np.int64)
    mark = np.full(s, -1, dtype=np.int64)
    c = 0
    for u in range(s):
        mark[u] = u
        for j in range(k):
            v = ids[u, j]
            if v < 0:
                break
            mark[v] = u
        for j in range(k):
            v = ids[u, j]
            if v < 0:
                break
            for l in range(k):
                w = ids[v, l]
                if w < 0:
                    break
                if mark[w] == u:
                    continue
                mark[w] = u
                keys[c] = (u * s + w) if u < w else (w * s + u)
                c += 1
    return keys[:c]


@numba.njit(nogil=True, cache=True)
def _nndescent_candidates(ids):
    s, k = ids.shape
    keys = np.empty(s * (k * (k - 1) // 2), dtype=np.int64)
    c = 0
    for u in range(s):
        for i in range(k):
            a = ids[u, i]
            if a < 0:
                break
            for j in range(i + 1, k):
                b = ids[u, j]
                if b < 0:
                    break
                keys[c] = (a * s + b) if a < b else (b * s + a)
                c += 1
    return keys[:c]


@numba.njit(nogil=True, cache=True)
def _commit(ids, sims, keys, vals):
    """Offer every evaluated pair to both endpoints, in key order.

    Returns the number of neighborhood entries that differ from the rows at
    the start of the commit, so the count never exceeds ``k * s``.
    """
    s, k = ids.shape
    before = ids.copy()
    for p in range(keys.shape[0]):
        a = keys[p] // s
        b = keys[p] % s
        row_add(ids, sims, a, b, vals[p])
        row_add(ids, sims, b, a, vals[p])
    changed = 0
    for r in range(s):
        for j in range(k):
            v = ids[r, j]
            if v < 0:
                break
            hit = False
            for q in range(k):
                if before[r, q] == v:
                    hit = True
                    break
            if not hit:
                changed += 1
    return changed


def _evaluate(oracle: SimilarityOracle, us, vs, threads: int) -> np.ndarray:
    """Similarities of pairs ``(us[p], vs[p])``, optionally split over threads."""
    out = np.empty(us.size, dtype=np.float64)
    if threads <= 1 or us.size < 4096:
        pair_sims(*oracle.args, us, vs, out)
    else:
        bounds = np.linspace(0, us.size, threads + 1).astype(np.int64)
        with ThreadPoolExecutor(max_workers=threads) as ex:
            futs = [ex.submit(pair_sims, *oracle.args, us[lo:hi], vs[lo:hi], out[lo:hi])
                    for lo, hi in zip(bounds[:-1], bounds[1:])]
            for f in futs:
                f.result()
    oracle.add_calls(us.size)
    return out


@dataclass
class GreedyStats:
    iterations: int = 0
    init_calls: int = 0
    calls: int = 0
    updates: list[int] = field(default_factory=list)
    converged: bool = False


def greedy_knn(users, oracle: SimilarityOracle, k: int, variant: str = HYREC,
               delta: float = 0.001, max_iters: int = 30, rng_seed: int = 0,
               threads: int = 1, stats: GreedyStats | None = None) -> KnnGraph:
    """Greedy KNN refinement from a random k-degree graph.

    Each iteration gathers candidate pairs from the graph as it stood at the
    start of the iteration (``hyrec``: a user against its neighbors'
    neighbors; ``nndescent``: all pairs within a neighborhood), evaluates
    each unordered pair at most once over the whole run, and commits the
    results in pair order to both endpoints. Iteration stops once fewer than
    ``delta * k * |users|`` neighborhood entries changed, or after
    ``max_iters`` iterations.
    """
    if variant not in (HYREC, NNDESCENT):
        raise ValueError(f"unknown greedy variant {variant!r}")
    members = _as_members(users, oracle.n_users)
    s = members.size
    if s <= k:
        raise ValueError(f"greedy solver needs more than k={k} users, got {s}")
    stats = stats if stats is not None else GreedyStats()
    seed = int(np.random.SeedSequence([rng_seed & (2**63 - 1)]).generate_state(1)[0] >> 1)

    ids, sims, init_keys = _random_init(members, k, seed, *oracle.args)
    oracle.add_calls(init_keys.size)
    stats.init_calls = init_keys.size
    stats.calls += init_keys.size
    seen = np.unique(init_keys)
    threshold = delta * k * s
    candidates = _hyrec_candidates if variant == HYREC else _nndescent_candidates

    for it in range(max_iters):
        keys = np.unique(candidates(ids))
        if seen.size and keys.size:
            pos = np.searchsorted(seen, keys)
            pos[pos == seen.size] = 0
            keys = keys[seen[pos] != keys]
        vals = _evaluate(oracle, members[keys // s], members[keys % s], threads)
        updates = _commit(ids, sims, keys, vals)
        seen = np.union1d(seen, keys)
        stats.iterations = it + 1
        stats.calls += keys.size
        stats.updates.append(int(updates))
        log.debug("%s iter %d: %d new pairs, %d updates", variant, it + 1, keys.size, updates)
        if updates < threshold:
            stats.converged = True
            break

    out_ids = np.where(ids >= 0, members[np.maximum(ids, 0)], -1).astype(np.int32)
    return KnnGraph(out_ids, sims, k=k, users=members)
