"""Largest-first parallel execution of per-cluster KNN jobs."""

from __future__ import annotations

import logging
import queue
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .clustering import Cluster
from .graph import KnnGraph
from .knn import HYREC, GreedyStats, brute_force_knn, greedy_knn
from .similarity import SimilarityOracle

log = logging.getLogger(__name__)

BRUTE = "brute"
GREEDY = "greedy"


def choose_solver(cluster_size: int, rho: int, k: int) -> str:
    """Brute force iff ``cluster_size < rho * k**2``."""
    if rho < 1 or k < 1:
        raise ValueError("rho and k must be >= 1")
    return BRUTE if cluster_size < rho * k * k else GREEDY


def cluster_seed(master_seed: int, c: Cluster) -> int:
    ss = np.random.SeedSequence([master_seed & (2**63 - 1), c.func,
                                 c.bucket & (2**63 - 1), len(c.chain), *c.chain])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)


@dataclass
class GreedyParams:
    variant: str = HYREC
    delta: float = 0.001
    max_iters: int = 30


@dataclass
class JobRecord:
    identity: tuple
    size: int
    solver: str
    calls: int
    seconds: float
    iterations: int = 0


@dataclass
class RunStats:
    jobs: list[JobRecord] = field(default_factory=list)
    skipped: int = 0
    dequeue_order: list[tuple] = field(default_factory=list)

    def summary(self) -> dict:
        sizes = np.array([j.size for j in self.jobs], dtype=np.int64)
        by_solver = {s: sum(1 for j in self.jobs if j.solver == s) for s in (BRUTE, GREEDY)}
        hist_edges = [2, 10, 100, 500, 1000, 2000, 4500, 10**9]
        hist = np.histogram(sizes, bins=hist_edges)[0].tolist() if sizes.size else []
        return {
            "clusters": len(self.jobs) + self.skipped,
            "jobs": len(self.jobs),
            "skipped_singletons": self.skipped,
            "jobs_by_solver": by_solver,
            "oracle_invocations": int(sum(j.calls for j in self.jobs)),
            "max_cluster": int(sizes.max()) if sizes.size else 0,
            "size_histogram": {"edges": hist_edges, "counts": hist},
        }


class JobQueue:
    """Synchronized queue handing out clusters by decreasing size.

    Ties are broken by cluster identity so the order is reproducible.
    """

    def __init__(self, clusters):
        self._q: queue.PriorityQueue = queue.PriorityQueue()
        for idx, c in enumerate(clusters):
            self._q.put((-len(c), c.identity, idx, c))

    def get(self):
        try:
            return self._q.get_nowait()[-1]
        except queue.Empty:
            return None

    def __len__(self):
        return self._q.qsize()


def solve_cluster(c: Cluster, oracle: SimilarityOracle, k: int, rho: int,
                  greedy: GreedyParams, seed: int) -> tuple[KnnGraph, JobRecord]:
    t0 = time.perf_counter()
    solver = choose_solver(len(c), rho, k)
    if solver == BRUTE:
        g = brute_force_knn(c.members, oracle, k)
        calls = len(c) * (len(c) - 1) // 2
        iters = 0
    else:
        st = GreedyStats()
        g = greedy_knn(c.members, oracle, k, variant=greedy.variant, delta=greedy.delta,
                       max_iters=greedy.max_iters, rng_seed=cluster_seed(seed, c), stats=st)
        calls = st.calls
        iters = st.iterations
    rec = JobRecord(c.identity, len(c), solver, calls, time.perf_counter() - t0, iters)
    return g, rec


def run_all(clusters, oracle: SimilarityOracle, k: int = 30, rho: int = 5,
            greedy: GreedyParams | None = None, threads: int = 1, seed: int = 0,
            stats: RunStats | None = None) -> list[tuple[Cluster, KnnGraph]]:
    """Compute a partial KNN graph for every cluster with ``threads`` workers.

    Results come back sorted by cluster identity, independent of the
    worker count and of the interleaving of dequeues.
    """
    if threads < 1:
        raise ValueError("threads must be >= 1")
    greedy = greedy or GreedyParams()
    stats = stats if stats is not None else RunStats()
    work = []
    for c in clusters:
        if len(c) < 2:
            stats.skipped += 1
        else:
            work.append(c)
    if stats.skipped:
        log.warning("skipped %d single-user clusters (no pairs to compare)", stats.skipped)

    jobs = JobQueue(work)
    lock = threading.Lock()
    results: dict[tuple, tuple[Cluster, KnnGraph]] = {}
    errors: list[BaseException] = []

    def worker():
        while True:
            with lock:
                c = jobs.get()
                if c is None:
                    return
                stats.dequeue_order.append((len(c), c.identity))
            try:
                g, rec = solve_cluster(c, oracle, k, rho, greedy, seed)
            except BaseException as exc:  # surfaced in the caller
                with lock:
                    errors.append(exc)
                return
            with lock:
                results[c.identity] = (c, g)
                stats.jobs.append(rec)

    if threads == 1:
        worker()
    else:
        pool = [threading.Thread(target=worker, daemon=True) for _ in range(threads)]
        for th in pool:
            th.start()
        for th in pool:
            th.join()
    if errors:
        raise errors[0]
    if len(results) != len(work):
        raise RuntimeError(f"{len(work) - len(results)} clusters were not processed")
    stats.jobs.sort(key=lambda j: j.identity)
    return [results[key] for key in sorted(results)]
