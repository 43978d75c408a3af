import csv
import json

import numpy as np
import pytest

from c2knn.cli import main, read_config
from c2knn.graph import read_graph


@pytest.fixture(scope="module")
def ratings(tmp_path_factory):
    """Ratings file: 300 users in 6 taste groups, mixed high and low ratings."""
    rng = np.random.default_rng(0)
    path = tmp_path_factory.mktemp("data") / "ratings.csv"
    lines = ["userId,movieId,rating,timestamp"]
    cores = [rng.choice(400, 50, replace=False) for _ in range(6)]
    for u in range(300):
        items = np.concatenate((rng.choice(cores[u % 6], 25, replace=False),
                                rng.choice(400, 10, replace=False)))
        for i in np.unique(items):
            r = rng.choice([2.0, 4.0, 5.0], p=[0.2, 0.4, 0.4])
            lines.append(f"u{u},m{i},{r},{1000 + u}")
    path.write_text("\n".join(lines) + "\n")
    return path


def run(args, capsys=None):
    code = main([str(a) for a in args])
    out = capsys.readouterr().out if capsys else ""
    return code, out


def base(ratings):
    return ["--input", ratings, "--k", 10, "--b", 64, "--N", 100]


def test_build_writes_graph_and_report(ratings, tmp_path):
    graph, report = tmp_path / "g.txt", tmp_path / "r.json"
    code, _ = run(["build", "--algo", "c2", *base(ratings), "--seed", 42, "--threads", 2,
                   "-o", graph, "--report", report, "--evaluate"])
    assert code == 0
    rep = json.loads(report.read_text())
    assert rep["version"] == 1 and rep["algorithm"] == "c2"
    assert rep["params"]["seed"] == 42 and rep["params"]["t"] == 8 and rep["params"]["k"] == 10
    assert rep["dataset"]["users"] > 200 and len(rep["dataset"]["sha256"]) == 64
    assert 0.5 < rep["quality"] <= 1.0
    assert rep["cluster_stats"]["clusters"] > 0
    lines = graph.read_text().splitlines()
    assert len(lines) == rep["dataset"]["users"]
    assert lines[0].startswith("u0\t")


def test_defaults_follow_reference_settings(ratings, capsys):
    code, out = run(["build", "--input", ratings, "--algo", "c2"], capsys)
    assert code == 0
    params = json.loads(out)["params"]
    assert params == {"k": 30, "b": 4096, "t": 8, "N": 2000, "rho": 5, "delta": 0.001,
                      "max_iters": 30, "lsh_t": 10, "gf_bits": 1024, "exact_sim": False,
                      "seed": 0, "threads": 1}


@pytest.mark.parametrize("flag,value", [("--t", 0), ("--k", -1), ("--threads", "x")])
def test_bad_flags_are_usage_errors(ratings, flag, value):
    with pytest.raises(SystemExit) as err:
        main(["build", "--algo", "c2", "--input", str(ratings), flag, str(value)])
    assert err.value.code == 2


def test_invalid_combination_is_usage_error(ratings, capsys):
    code, _ = run(["build", "--input", ratings, "--gf-bits", 100], capsys)
    assert code == 2


def test_missing_input_is_runtime_error(tmp_path, capsys):
    code = main(["build", "--input", str(tmp_path / "nope.csv")])
    assert code == 1
    assert "c2knn: FileNotFoundError" in capsys.readouterr().err


def test_bruteforce_exact_counts_all_pairs(ratings, capsys):
    code, out = run(["bench", "bruteforce", *base(ratings), "--exact-sim"], capsys)
    rep = json.loads(out)
    n = rep["dataset"]["users"]
    assert code == 0 and rep["oracle_invocations"] == n * (n - 1) // 2


def test_config_file_overridden_by_flags(ratings, tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# settings\nk = 7\nmax-iters = 4\nexact_sim = true\nt=3\n")
    assert read_config(cfg)["max_iters"] == "4"
    code, out = run(["build", "--input", ratings, "--config", cfg, "--t", 2], capsys)
    params = json.loads(out)["params"]
    assert code == 0
    assert params["k"] == 7 and params["max_iters"] == 4 and params["exact_sim"] is True
    assert params["t"] == 2


def test_bad_config_line(ratings, tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("k 7\n")
    code, _ = run(["build", "--input", ratings, "--config", cfg], capsys)
    assert code == 2


@pytest.mark.parametrize("fmt", ["text", "binary"])
def test_eval_and_recommend(ratings, tmp_path, capsys, fmt):
    graph = tmp_path / "g.out"
    run(["build", *base(ratings), "-o", graph, "--graph-format", fmt], capsys)
    code, out = run(["eval", "--input", ratings, "--graph", graph], capsys)
    rep = json.loads(out)
    assert code == 0 and 0.5 < rep["quality"] <= 1.0
    code, out = run(["recommend", "--input", ratings, "--graph", graph, "--user", "u3",
                     "--n", 5], capsys)
    assert code == 0 and 1 <= len(out.split()) <= 5
    code, _ = run(["recommend", "--input", ratings, "--graph", graph, "--user", "ghost"], capsys)
    assert code == 2


def test_eval_recall(ratings, capsys):
    code, out = run(["eval", "--input", ratings, "--graph", _exact_graph(ratings, capsys),
                     "--recall", "--algo", "bruteforce", "--k", 10], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["quality"] == pytest.approx(1.0, abs=1e-9)
    assert 0.0 < rep["recall"] < 1.0


def _exact_graph(ratings, capsys):
    path = ratings.parent / "exact.txt"
    run(["build", "--algo", "bruteforce", "--input", ratings, "--k", 10, "--exact-sim",
         "-o", path], capsys)
    return path


def test_sweep_grid_rows(ratings, tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    code, _ = run(["sweep", "--input", ratings, "--k", 10, "--t-grid", "1,2,4,8,10",
                   "--b-grid", "512,2048,8192", "-o", out], capsys)
    rows = list(csv.DictReader(out.open()))
    assert code == 0 and len(rows) == 15
    assert {(int(r["t"]), int(r["b"])) for r in rows} == {
        (t, b) for t in (1, 2, 4, 8, 10) for b in (512, 2048, 8192)}


def test_single_point_sweep_matches_build(ratings, tmp_path, capsys):
    code, out = run(["sweep", *base(ratings), "--t", 3], capsys)
    (row,) = list(csv.DictReader(out.splitlines()))
    code, out = run(["build", *base(ratings), "--t", 3, "--evaluate"], capsys)
    rep = json.loads(out)
    assert float(row["quality"]) == pytest.approx(rep["quality"], abs=1e-12)
    assert int(row["oracle_invocations"]) == rep["oracle_invocations"]


def test_empty_grid_rejected(ratings, capsys):
    code, _ = run(["sweep", "--input", ratings, "--b-grid", ""], capsys)
    assert code == 2


def test_verify_theorems(tmp_path, capsys):
    out = tmp_path / "t.json"
    code, _ = run(["verify-theorems", "--trials", 3000, "-o", out], capsys)
    rep = json.loads(out.read_text())
    assert code == 0 and rep["theorem1"]["violations"] == 0
    assert len(rep["theorem2"]) == 4 and all(r["holds"] for r in rep["theorem2"])
    code, text = run(["verify-theorems", "--trials", 3000, "--format", "markdown"], capsys)
    assert code == 0 and text.startswith("# Collision bound checks")


def test_dataset_prepare_round_trip(ratings, tmp_path, capsys):
    snap = tmp_path / "snap.txt"
    code, out = run(["dataset", "prepare", "--input", ratings, "-o", snap], capsys)
    assert code == 0 and json.loads(out)["users"] > 200
    g1, g2 = tmp_path / "a.txt", tmp_path / "b.txt"
    run(["build", *base(ratings), "-o", g1], capsys)
    run(["build", "--input", snap, "--k", 10, "--b", 64, "--N", 100, "-o", g2], capsys)
    assert g1.read_bytes() == g2.read_bytes()


def test_dump_clusters(ratings, tmp_path, capsys):
    dump = tmp_path / "clusters.txt"
    run(["build", *base(ratings), "--dump-clusters", dump], capsys)
    rows = [line.split() for line in dump.read_text().splitlines()]
    assert rows and all(len(r) == 4 for r in rows)


def test_all_algorithms_build(ratings, tmp_path, capsys):
    for algo in ("c2", "bruteforce", "hyrec", "nndescent", "lsh"):
        path = tmp_path / f"{algo}.txt"
        code, out = run(["build", "--algo", algo, *base(ratings), "-o", path], capsys)
        assert code == 0, algo
        g = read_graph(path, user_index=_index(path))
        g.validate()


def _index(path):
    names = [line.split("\t", 1)[0] for line in path.read_text().splitlines()]
    lookup = {n: i for i, n in enumerate(names)}
    return lookup.__getitem__
