"""Cluster-and-Conquer: cluster, solve clusters in parallel, merge."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass

from .clustering import ClusteringConfig, build_clusters
from .graph import KnnGraph
from .merge import merge_partials
from .scheduler import GreedyParams, RunStats, run_all
from .similarity import SimilarityOracle

log = logging.getLogger(__name__)

ALGORITHMS = ("c2", "bruteforce", "hyrec", "nndescent", "lsh")


@dataclass
class BuildParams:
    k: int = 30
    b: int = 4096
    t: int = 8
    N: int = 2000
    rho: int = 5
    delta: float = 0.001
    max_iters: int = 30
    lsh_t: int = 10
    gf_bits: int = 1024
    exact_sim: bool = False
    seed: int = 0
    threads: int = 1

    def validate(self) -> None:
        for name in ("k", "b", "t", "N", "rho", "max_iters", "lsh_t", "threads"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if self.gf_bits < 64 or self.gf_bits & (self.gf_bits - 1):
            raise ValueError("gf_bits must be a power of two >= 64")

    @property
    def sim_mode(self) -> str:
        return "exact" if self.exact_sim else "goldfinger"

    def greedy(self, variant: str = "hyrec") -> GreedyParams:
        return GreedyParams(variant=variant, delta=self.delta, max_iters=self.max_iters)

    def to_dict(self) -> dict:
        return asdict(self)


def make_oracle(ds, params: BuildParams) -> SimilarityOracle:
    return SimilarityOracle(ds, mode=params.sim_mode, bits=params.gf_bits, seed=params.seed)


def run_c2(ds, params: BuildParams | None = None, oracle: SimilarityOracle | None = None,
           stats: RunStats | None = None) -> tuple[KnnGraph, dict]:
    """Build an approximate KNN graph; returns the graph and a run report."""
    params = params or BuildParams()
    params.validate()
    timings = {}
    t0 = time.perf_counter()
    oracle = oracle or make_oracle(ds, params)
    timings["signatures"] = time.perf_counter() - t0

    t1 = time.perf_counter()
    cfg = ClusteringConfig(t=params.t, b=params.b, N=params.N, seed=params.seed)
    clusters = build_clusters(ds, cfg, threads=params.threads)
    timings["clustering"] = time.perf_counter() - t1

    t2 = time.perf_counter()
    stats = stats if stats is not None else RunStats()
    partials = run_all(clusters, oracle, k=params.k, rho=params.rho, greedy=params.greedy(),
                       threads=params.threads, seed=params.seed, stats=stats)
    timings["knn"] = time.perf_counter() - t2

    t3 = time.perf_counter()
    graph = merge_partials(partials, ds.n_users, params.k, threads=params.threads)
    timings["merge"] = time.perf_counter() - t3
    total = time.perf_counter() - t0

    cluster_stats = stats.summary()
    cluster_stats["terminal_oversized"] = sum(1 for c in clusters if c.terminal)
    report = {
        "algorithm": "c2",
        "params": params.to_dict(),
        "build_seconds": total,
        "phase_seconds": timings,
        "oracle_invocations": oracle.calls,
        "cluster_stats": cluster_stats,
    }
    log.info("c2: %d clusters, %d oracle calls, %.2fs", len(clusters), oracle.calls, total)
    return graph, report
