"""Acceptance suite: one test per numbered criterion.

Run with ``pytest tests/test_acceptance.py``; the terminal summary prints
one PASS/FAIL/SKIP line per criterion. Criteria 6-8 need the MovieLens 1M
ratings file, located through ``C2KNN_ML1M`` or ``data/ml-1m/ratings.dat``.
"""

import os
import time
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from c2knn.analysis import REFERENCE_INTERVAL, check_theorem1, check_theorem2
from c2knn.baselines import run_bruteforce, run_greedy_full
from c2knn.cli import main
from c2knn.clustering import Cluster, ClusteringConfig, split_recursive
from c2knn.dataset import Dataset, binarize_and_filter, load_ratings, make_folds
from c2knn.hashing import HashFamily
from c2knn.merge import merge_partials
from c2knn.metrics import quality, recall_at_n
from c2knn.pipeline import BuildParams, run_c2
from c2knn.scheduler import BRUTE, GREEDY, RunStats
from c2knn.synthetic import planted_clusters
from oracles import gather_sort_merge, graph_rows, naive_topk, random_ds, random_partials

pytestmark = pytest.mark.acceptance


# 1 ------------------------------------------------------------------------

@settings(max_examples=50, derandomize=True, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 300), m=st.integers(1, 500),
       k=st.integers(1, 40), dup=st.sampled_from([0.0, 0.1]))
def _bruteforce_vs_naive(seed, n, m, k, dup):
    rng = np.random.default_rng(seed)
    ds = random_ds(rng, n, m, max_size=min(m, 40), dup_rate=dup)
    g, rep = run_bruteforce(ds, BuildParams(k=k, exact_sim=True))
    assert rep["oracle_invocations"] == n * (n - 1) // 2
    assert graph_rows(g) == naive_topk([p.tolist() for p in ds.profiles], k)


def test_criterion_01_exact_oracle_equivalence(record_property):
    t0 = time.perf_counter()
    _bruteforce_vs_naive()
    elapsed = time.perf_counter() - t0
    record_property("detail", f"50 datasets in {elapsed:.1f}s")
    assert elapsed < 60


# 2 ------------------------------------------------------------------------

def test_criterion_02_merge_correctness(record_property):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20)
    for _ in range(100):
        n, k = int(rng.integers(2, 150)), int(rng.integers(1, 15))
        parts = random_partials(rng, n, k, int(rng.integers(1, 9)))
        g = merge_partials(parts, n, k)
        g.validate()
        assert graph_rows(g) == gather_sort_merge(parts, n, k)
        for _ in range(20):
            order = rng.permutation(len(parts))
            assert merge_partials([parts[i] for i in order], n, k) == g
    elapsed = time.perf_counter() - t0
    record_property("detail", f"100 sets x 20 permutations in {elapsed:.1f}s")
    assert elapsed < 60


# 3 ------------------------------------------------------------------------

def test_criterion_03_partition_preservation(record_property):
    t0 = time.perf_counter()
    rng = np.random.default_rng(30)
    terminal = split = 0
    for _ in range(1000):
        N = int(rng.integers(2, 40))
        size = int(rng.integers(1, 10 * N + 1))
        b = int(rng.integers(2, 64))
        beta = int(rng.integers(1, b + 1))
        n_items = int(rng.integers(2, 60))
        # item 0 pins every member to bucket beta; the rest hash at or above it
        row = rng.integers(beta, b + 1, size=n_items)
        row[0] = beta
        fam = HashFamily.from_table([row], b=b)
        profiles = [np.concatenate(([0], rng.choice(n_items, int(rng.integers(0, 6)))))
                    for _ in range(size)]
        ds = Dataset.from_profiles(profiles, n_items=n_items)
        c = Cluster(np.arange(size), 0, beta)
        leaves = split_recursive(c, ClusteringConfig(t=1, b=b, N=N, family=fam), ds)
        got = np.sort(np.concatenate([x.members for x in leaves]))
        assert np.array_equal(got, c.members)
        assert all(len(x) <= N or x.terminal for x in leaves)
        terminal += sum(x.terminal for x in leaves)
        split += len(leaves) > 1
    elapsed = time.perf_counter() - t0
    record_property("detail", f"1000 clusters, {split} split, {terminal} terminal leaves, "
                              f"{elapsed:.1f}s")
    assert elapsed < 60


# 4 ------------------------------------------------------------------------

def _pair_with_jaccard(j, ell=256):
    common = round(j * ell)
    x = (ell + common) // 2
    return list(range(0, x)), list(range(x - common, ell))


@pytest.mark.parametrize("j", [0.25, 0.5, 0.75])
def test_criterion_04_theorem1_interval(j, record_property):
    p1, p2 = _pair_with_jaccard(j)
    t0 = time.perf_counter()
    rep = check_theorem1(p1, p2, 4096, trials=100_000, seed=40, interval=REFERENCE_INTERVAL)
    assert rep["ell_union"] == 256
    record_property("detail", (
        f"J={rep['J']:.3f} P^={rep['p_hat']:.4f} >= mean(J-k/l)={rep['lower_bound']:.4f}, "
        f"interval containment {rep['interval_containment']:.4f}"))
    assert rep["p_hat"] >= rep["lower_bound"] - 3 * rep["p_hat_stderr"]
    assert rep["interval_containment"] >= 0.995
    assert time.perf_counter() - t0 < 120


# 5 ------------------------------------------------------------------------

@pytest.mark.parametrize("ell,b,d", [(256, 4096, 0.5), (64, 512, 1.0), (512, 4096, 0.25)])
def test_criterion_05_theorem2_bound(ell, b, d, record_property):
    rep = check_theorem2(ell, b, d, trials=100_000, seed=50)
    record_property("detail", f"(l={ell}, b={b}, d={d}) freq {rep['frequency']:.4f} "
                              f"vs bound {rep['bound']:.4f}")
    assert rep["frequency"] >= rep["bound"] - 3 * rep["stderr"]


# 6-8 ----------------------------------------------------------------------

def _ml1m_path():
    env = os.environ.get("C2KNN_ML1M")
    candidates = [Path(env)] if env else []
    candidates.append(Path(__file__).resolve().parents[1] / "data" / "ml-1m" / "ratings.dat")
    for p in candidates:
        if p.is_file():
            return p
    return None


@pytest.fixture(scope="module")
def ml1m():
    path = _ml1m_path()
    if path is None:
        pytest.skip("MovieLens 1M ratings not found (set C2KNN_ML1M or add data/ml-1m/ratings.dat)")
    return binarize_and_filter(load_ratings(path), positive_threshold=3.0, min_profile=20)


@pytest.fixture(scope="module")
def ml1m_exact(ml1m):
    return run_bruteforce(ml1m, BuildParams(exact_sim=True))[0]


def test_criterion_06_quality_movielens(ml1m, ml1m_exact, record_property):
    assert (ml1m.n_users, ml1m.n_items, ml1m.n_ratings) == (6038, 3533, 575281)
    g, rep = run_c2(ml1m, BuildParams())
    q = quality(g, ml1m_exact, ml1m)
    record_property("detail", f"quality {q:.4f} in {rep['build_seconds']:.2f}s")
    assert q >= 0.88


def test_criterion_07_speedup_movielens(ml1m, record_property):
    params = BuildParams(threads=8)
    _, c2 = run_c2(ml1m, params)
    _, hy = run_greedy_full(ml1m, "hyrec", params)
    record_property("detail", f"c2 {c2['build_seconds']:.2f}s vs hyrec {hy['build_seconds']:.2f}s")
    assert c2["build_seconds"] <= hy["build_seconds"]


def test_criterion_08_recall_movielens(ml1m, record_property):
    folds = make_folds(ml1m, 5, seed=0)
    exact = recall_at_n([run_bruteforce(f.train, BuildParams(exact_sim=True))[0] for f in folds],
                        folds, 30)
    c2 = recall_at_n([run_c2(f.train, BuildParams())[0] for f in folds], folds, 30)
    record_property("detail", f"exact {exact:.4f}, c2 {c2:.4f}")
    assert 0.19 <= exact <= 0.25
    assert abs(c2 - exact) <= 0.02


# 9 ------------------------------------------------------------------------

def test_criterion_09_hybrid_switch_audit(record_property):
    # b=60 yields first-level clusters on both sides of rho*k^2 = 4500
    ds = planted_clusters(12000, 3000, 60, core=60, take=25, noise=5, seed=0)
    params = BuildParams(k=30, rho=5, t=2, b=60, N=10**6)
    stats = RunStats()
    run_c2(ds, params, stats=stats)
    sizes = {BRUTE: [], GREEDY: []}
    for job in stats.jobs:
        sizes[job.solver].append(job.size)
        if job.size < 4500:
            assert job.solver == BRUTE
            assert job.calls == job.size * (job.size - 1) // 2
        else:
            assert job.solver == GREEDY
            assert job.calls < 5 * 30 * 30 * job.size / 2
    assert sizes[GREEDY] and max(sizes[BRUTE]) > 2000
    worst = max(j.calls / j.size for j in stats.jobs if j.solver == GREEDY)
    record_property("detail", f"{len(sizes[BRUTE])} brute (max {max(sizes[BRUTE])}), "
                              f"{len(sizes[GREEDY])} greedy {sorted(sizes[GREEDY])}, "
                              f"max {worst:.0f} calls/user vs 2250")


# 10 -----------------------------------------------------------------------

@pytest.fixture(scope="module")
def ratings_file(tmp_path_factory):
    ds = planted_clusters(3000, 2000, 15, seed=10)
    rng = np.random.default_rng(10)
    path = tmp_path_factory.mktemp("det") / "ratings.csv"
    with open(path, "w") as fh:
        for u in range(ds.n_users):
            for i in ds.profile(u):
                fh.write(f"{u},{i},{rng.choice([4.0, 5.0])},0\n")
    return path


@pytest.mark.parametrize("algo", ["c2", "bruteforce", "hyrec", "nndescent", "lsh"])
@pytest.mark.parametrize("fmt", ["text", "binary"])
def test_criterion_10_determinism(ratings_file, tmp_path, algo, fmt, record_property):
    outs = []
    for w in (1, 8):
        out = tmp_path / f"{algo}-{w}.{fmt}"
        # k=10 puts the greedy switch at 500 users, so c2 runs both solvers
        code = main(["build", "--algo", algo, "--input", str(ratings_file), "--k", "10",
                     "--b", "8", "--N", "1500", "--seed", "7", "--threads", str(w),
                     "--min-profile", "1", "-o", str(out), "--graph-format", fmt,
                     "--report", str(tmp_path / f"r{w}.json")])
        assert code == 0
        outs.append(out.read_bytes())
    record_property("detail", f"{algo}/{fmt}: {len(outs[0])} bytes identical")
    assert outs[0] == outs[1]
