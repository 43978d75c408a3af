"""Folding per-cluster partial graphs into one bounded KNN graph."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numba
import numpy as np

from .graph import KnnGraph, empty_rows, row_add


class UnknownUser(ValueError):
    pass


@numba.njit(nogil=True, cache=True)
def _merge_into(g_ids, g_sims, users, ids, sims, lo, hi):
    for r in range(users.shape[0]):
        u = users[r]
        if u < lo or u >= hi:
            continue
        for j in range(ids.shape[1]):
            v = ids[r, j]
            if v < 0:
                break
            row_add(g_ids, g_sims, u, v, sims[r, j])


def _check(g: KnnGraph, n_users: int) -> None:
    if g.users.size and (g.users.min() < 0 or g.users.max() >= n_users):
        raise UnknownUser(f"partial graph row references a user outside 0..{n_users - 1}")
    valid = g.ids >= 0
    if np.any(g.ids[valid] >= n_users):
        raise UnknownUser(f"partial graph neighbor outside 0..{n_users - 1}")
    if np.any(g.ids == g.users[:, None]):
        raise UnknownUser("partial graph lists a user as its own neighbor")


def merge_partials(partials, n_users: int, k: int, threads: int = 1) -> KnnGraph:
    """Top-k union of every user's candidates across ``partials``.

    ``partials`` holds ``(cluster, graph)`` pairs or bare graphs. The merge
    reuses the similarities stored in the partial graphs and never calls
    the oracle. Users are sharded across ``threads`` workers by id range.
    """
    graphs = [p[1] if isinstance(p, tuple) else p for p in partials]
    for g in graphs:
        _check(g, n_users)
    ids, sims = empty_rows(n_users, k)

    def shard(lo, hi):
        for g in graphs:
            _merge_into(ids, sims, g.users, g.ids, g.sims, lo, hi)

    if threads <= 1:
        shard(0, n_users)
    else:
        bounds = np.linspace(0, n_users, threads + 1).astype(np.int64)
        with ThreadPoolExecutor(max_workers=threads) as ex:
            for f in [ex.submit(shard, int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:])]:
                f.result()
    return KnnGraph(ids, sims, k=k)
