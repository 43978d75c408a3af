"""Graph quality and recommendation recall."""

from __future__ import annotations

from typing import Sequence

import numba
import numpy as np

from .graph import KnnGraph
from .similarity import jaccard_csr


@numba.njit(nogil=True, cache=True)
def _edge_sim_sum(users, ids, indptr, indices):
    total = 0.0
    for r in range(users.shape[0]):
        u = users[r]
        for j in range(ids.shape[1]):
            v = ids[r, j]
            if v < 0:
                break
            total += jaccard_csr(indptr, indices, u, v)
    return total


def avg_sim(g: KnnGraph, ds) -> float:
    """Mean exact Jaccard over the graph's edges, divided by ``k * n``.

    Missing neighbors count as zero, so a graph with short neighborhoods
    scores lower than the mean of its stored edges.
    """
    if g.n == 0 or g.k == 0:
        raise ValueError("empty graph")
    total = _edge_sim_sum(g.users, g.ids, ds.indptr, ds.indices)
    return total / (g.k * ds.n_users)


def quality(g: KnnGraph, exact: KnnGraph, ds) -> float:
    """Average similarity of ``g`` relative to the exact graph."""
    ref = avg_sim(exact, ds)
    if ref == 0:
        raise ZeroDivisionError("exact graph has zero average similarity")
    return avg_sim(g, ds) / ref


@numba.njit(nogil=True, cache=True)
def _recommend_rows(rows, users, ids, sims, indptr, indices, n_items, n_rec):
    out = np.full((rows.shape[0], max(n_rec, 1)), -1, dtype=np.int64)
    score = np.zeros(n_items, dtype=np.float64)
    stamp = np.full(n_items, -1, dtype=np.int64)
    owned = np.full(n_items, -1, dtype=np.int64)
    touched = np.empty(n_items, dtype=np.int64)
    for q in range(rows.shape[0]):
        r = rows[q]
        u = users[r]
        for p in range(indptr[u], indptr[u + 1]):
            owned[indices[p]] = q
        nt = 0
        for j in range(ids.shape[1]):
            v = ids[r, j]
            if v < 0:
                break
            s = sims[r, j]
            for p in range(indptr[v], indptr[v + 1]):
                i = indices[p]
                if owned[i] == q:
                    continue
                if stamp[i] != q:
                    stamp[i] = q
                    score[i] = 0.0
                    touched[nt] = i
                    nt += 1
                score[i] += s
        cand = np.sort(touched[:nt])
        neg = np.empty(nt, dtype=np.float64)
        for c in range(nt):
            neg[c] = -score[cand[c]]
        order = np.argsort(neg, kind="mergesort")
        w = 0
        for c in range(nt):
            if w >= n_rec:
                break
            i = cand[order[c]]
            if score[i] > 0.0:
                out[q, w] = i
                w += 1
    return out


def _row_of(g: KnnGraph, u: int) -> int:
    r = int(np.searchsorted(g.users, u))
    if r >= g.n or g.users[r] != u:
        raise KeyError(f"user {u} not in graph")
    return r


def recommend(g: KnnGraph, ds, u: int, n_rec: int = 30) -> list[int]:
    """Top ``n_rec`` items for ``u`` by summed neighbor similarity.

    Items already in ``u``'s profile are excluded; ties go to the lower
    item id. Fewer than ``n_rec`` items come back when the neighborhood
    does not offer enough.
    """
    if n_rec <= 0:
        return []
    r = _row_of(g, u)
    out = _recommend_rows(np.array([r]), g.users, g.ids, g.sims, ds.indptr, ds.indices,
                          ds.n_items, n_rec)[0]
    return out[out >= 0].tolist()


def recommend_all(g: KnnGraph, ds, n_rec: int = 30) -> np.ndarray:
    """Recommendations for every graph row, shape ``(n, n_rec)``, padded with -1."""
    return _recommend_rows(np.arange(g.n), g.users, g.ids, g.sims, ds.indptr, ds.indices,
                           ds.n_items, n_rec)


def fold_recall(g: KnnGraph, fold, n_rec: int = 30, average: str = "macro") -> float:
    """Recall of one fold; ``g`` must be built on ``fold.train``.

    ``macro`` averages per-user recall over users with a non-empty test set;
    ``micro`` pools hits over all held-out items.
    """
    if average not in ("macro", "micro"):
        raise ValueError(f"unknown averaging {average!r}")
    sizes = np.array([t.size for t in fold.test])
    if not sizes.any():
        raise ValueError("all test sets are empty")
    if n_rec <= 0:
        return 0.0
    recs = recommend_all(g, fold.train, n_rec)
    hits = np.zeros(g.n, dtype=np.int64)
    for r in range(g.n):
        test = fold.test[g.users[r]]
        if test.size:
            hits[r] = np.intersect1d(recs[r][recs[r] >= 0], test, assume_unique=True).size
    tsz = sizes[g.users]
    if average == "micro":
        return float(hits.sum() / tsz.sum())
    mask = tsz > 0
    return float(np.mean(hits[mask] / tsz[mask]))


def recall_at_n(graphs: Sequence[KnnGraph], folds, n_rec: int = 30,
                average: str = "macro") -> float:
    """Recall averaged over folds; ``graphs[f]`` is built on ``folds[f].train``."""
    if len(graphs) != len(folds):
        raise ValueError("need one graph per fold")
    return float(np.mean([fold_recall(g, f, n_rec, average) for g, f in zip(graphs, folds)]))
