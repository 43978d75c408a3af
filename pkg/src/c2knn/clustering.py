"""FastRandomHash clustering with recursive splitting of oversized clusters."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .hashing import HashFamily, frh_all, frh_bounded

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Cluster:
    """Users sharing one hash value under one generative function.

    ``chain`` lists the bucket values excluded along the split lineage
    (empty for first-level clusters); ``terminal`` marks an oversized
    cluster that the split rule cannot refine further.
    """

    members: np.ndarray
    func: int
    bucket: int
    chain: tuple[int, ...] = ()
    terminal: bool = False

    def __len__(self) -> int:
        return int(self.members.size)

    @property
    def identity(self) -> tuple:
        return (self.func, self.chain, self.bucket)

    def __repr__(self):
        return (f"Cluster(func={self.func}, bucket={self.bucket}, chain={self.chain}, "
                f"size={len(self)}{', terminal' if self.terminal else ''})")


@dataclass
class ClusteringConfig:
    t: int = 8
    b: int = 4096
    N: int = 2000
    seed: int = 0
    family: Optional[HashFamily] = field(default=None)

    def __post_init__(self):
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if self.family is None:
            self.family = HashFamily(self.t, self.b, self.seed)
        elif (self.family.t, self.family.b) != (self.t, self.b):
            self.t, self.b = self.family.t, self.family.b


def _group(members: np.ndarray, values: np.ndarray):
    """Yield ``(value, members)`` per distinct value, in value order."""
    if values.size == 0:
        return
    order = np.argsort(values, kind="stable")
    vals = values[order]
    mem = members[order]
    cuts = np.flatnonzero(np.diff(vals)) + 1
    starts = np.concatenate(([0], cuts))
    ends = np.concatenate((cuts, [vals.size]))
    for lo, hi in zip(starts, ends):
        yield int(vals[lo]), np.sort(mem[lo:hi])


def cluster_all(ds, cfg: ClusteringConfig, threads: int = 1) -> list[list[Cluster]]:
    """One clustering configuration per generative function, before splitting."""
    table = cfg.family.bucket_table(ds.n_items)
    users = np.arange(ds.n_users, dtype=np.int64)

    def one(f):
        H = frh_all(ds.indptr, ds.indices, table[f])
        return [Cluster(m, f, v) for v, m in _group(users, H)]

    if threads > 1 and cfg.t > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(one, range(cfg.t)))
    return [one(f) for f in range(cfg.t)]


def split_recursive(c: Cluster, cfg: ClusteringConfig, ds, row: np.ndarray | None = None) -> list[Cluster]:
    """Split ``c`` while it exceeds ``cfg.N`` users.

    Members are re-hashed ignoring every item bucket up to the cluster's
    own bucket. Users with no remaining item, and users alone in their new
    bucket, stay in a residual cluster that keeps ``c``'s identity; the
    residual is not split again (the same rule would reproduce it).
    """
    if row is None:
        row = cfg.family.bucket_table(ds.n_items)[c.func]
    out: list[Cluster] = []
    stack = [c]
    while stack:
        cur = stack.pop()
        if len(cur) <= cfg.N:
            out.append(cur)
            continue
        hv = frh_bounded(ds.indptr, ds.indices, cur.members, row, cur.bucket)
        keep = hv == 0
        children = []
        chain = cur.chain + (cur.bucket,)
        present = ~keep
        for v, mem in _group(cur.members[present], hv[present]):
            if mem.size == 1:
                keep[np.searchsorted(cur.members, mem[0])] = True
            else:
                children.append(Cluster(mem, cur.func, v, chain))
        if not children:
            log.debug("cluster %s cannot be split further", cur)
            out.append(Cluster(cur.members, cur.func, cur.bucket, cur.chain, terminal=True))
            continue
        residual = cur.members[keep]
        if residual.size:
            out.append(Cluster(residual, cur.func, cur.bucket, cur.chain,
                               terminal=residual.size > cfg.N))
        stack.extend(children)
    out.sort(key=lambda x: x.identity)
    return out


def build_clusters(ds, cfg: ClusteringConfig, threads: int = 1) -> list[Cluster]:
    """Full clustering step: all configurations, oversized clusters split."""
    table = cfg.family.bucket_table(ds.n_items)
    leaves: list[Cluster] = []
    for per_func in cluster_all(ds, cfg, threads=threads):
        for c in per_func:
            if len(c) > cfg.N:
                leaves.extend(split_recursive(c, cfg, ds, row=table[c.func]))
            else:
                leaves.append(c)
    n_terminal = sum(1 for c in leaves if c.terminal)
    if n_terminal:
        log.warning("%d oversized clusters could not be split below N=%d", n_terminal, cfg.N)
    leaves.sort(key=lambda x: x.identity)
    return leaves


def dump_clusters(clusters, path) -> None:
    """Debug dump, one line per cluster: ``func bucket chain size``."""
    with open(path, "w", encoding="utf-8") as fh:
        for c in clusters:
            chain = "-".join(map(str, c.chain)) or "-"
            fh.write(f"{c.func} {c.bucket} {chain} {len(c)}\n")
