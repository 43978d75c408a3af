"""Reference pipelines: exact brute force, full-dataset greedy, MinHash LSH."""

from __future__ import annotations

import logging
import time

import numpy as np

from .clustering import Cluster
from .graph import KnnGraph
from .hashing import minhash_all, minhash_table
from .knn import HYREC, NNDESCENT, GreedyStats, brute_force_knn, greedy_knn
from .merge import merge_partials
from .pipeline import BuildParams, make_oracle, run_c2
from .scheduler import RunStats, run_all
from .similarity import SimilarityOracle

log = logging.getLogger(__name__)


def _report(algo, params, seconds, oracle, extra=None):
    out = {
        "algorithm": algo,
        "params": params.to_dict(),
        "build_seconds": seconds,
        "oracle_invocations": oracle.calls,
    }
    if extra:
        out.update(extra)
    return out


def run_bruteforce(ds, params: BuildParams | None = None,
                   oracle: SimilarityOracle | None = None) -> tuple[KnnGraph, dict]:
    """Exact KNN graph over all users: n(n-1)/2 similarity evaluations."""
    params = params or BuildParams()
    t0 = time.perf_counter()
    oracle = oracle or make_oracle(ds, params)
    g = brute_force_knn(np.arange(ds.n_users), oracle, params.k)
    return KnnGraph(g.ids, g.sims, k=params.k), _report(
        "bruteforce", params, time.perf_counter() - t0, oracle)


def run_greedy_full(ds, variant: str = HYREC, params: BuildParams | None = None,
                    oracle: SimilarityOracle | None = None) -> tuple[KnnGraph, dict]:
    """Hyrec or NNDescent over the whole dataset.

    Pair evaluation within an iteration is spread over ``params.threads``
    workers; results are committed in a fixed order.
    """
    params = params or BuildParams()
    t0 = time.perf_counter()
    oracle = oracle or make_oracle(ds, params)
    users = np.arange(ds.n_users)
    if ds.n_users <= params.k:
        g = brute_force_knn(users, oracle, params.k)
        extra = {"iterations": 0, "updates": []}
    else:
        st = GreedyStats()
        g = greedy_knn(users, oracle, params.k, variant=variant, delta=params.delta,
                       max_iters=params.max_iters, rng_seed=params.seed,
                       threads=params.threads, stats=st)
        for it, upd in enumerate(st.updates, 1):
            log.info("%s iteration %d: %d updates", variant, it, upd)
        extra = {"iterations": st.iterations, "updates": st.updates, "converged": st.converged}
    return KnnGraph(g.ids, g.sims, k=params.k), _report(
        variant, params, time.perf_counter() - t0, oracle, extra)


def lsh_clusters(ds, t_lsh: int, seed: int) -> list[Cluster]:
    """One bucket per distinct MinHash value, for each of ``t_lsh`` functions."""
    table = minhash_table(ds.n_items, t_lsh, seed)
    users = np.arange(ds.n_users, dtype=np.int64)
    out = []
    for f in range(t_lsh):
        mh = minhash_all(ds.indptr, ds.indices, table[f])
        order = np.argsort(mh, kind="stable")
        vals = mh[order]
        cuts = np.flatnonzero(np.diff(vals)) + 1
        for lo, hi in zip(np.concatenate(([0], cuts)), np.concatenate((cuts, [vals.size]))):
            out.append(Cluster(np.sort(users[order[lo:hi]]), f, int(vals[lo])))
    out.sort(key=lambda c: c.identity)
    return out


def run_lsh(ds, params: BuildParams | None = None,
            oracle: SimilarityOracle | None = None) -> tuple[KnnGraph, dict]:
    """MinHash LSH: bucket users per function, solve buckets, merge."""
    params = params or BuildParams()
    t0 = time.perf_counter()
    oracle = oracle or make_oracle(ds, params)
    clusters = lsh_clusters(ds, params.lsh_t, params.seed)
    stats = RunStats()
    partials = run_all(clusters, oracle, k=params.k, rho=params.rho, greedy=params.greedy(),
                       threads=params.threads, seed=params.seed, stats=stats)
    g = merge_partials(partials, ds.n_users, params.k, threads=params.threads)
    return g, _report("lsh", params, time.perf_counter() - t0, oracle,
                      {"cluster_stats": stats.summary()})


def build(ds, algo: str, params: BuildParams | None = None) -> tuple[KnnGraph, dict]:
    params = params or BuildParams()
    params.validate()
    if algo == "c2":
        return run_c2(ds, params)
    if algo == "bruteforce":
        return run_bruteforce(ds, params)
    if algo in (HYREC, NNDESCENT):
        return run_greedy_full(ds, algo, params)
    if algo == "lsh":
        return run_lsh(ds, params)
    raise ValueError(f"unknown algorithm {algo!r}")
