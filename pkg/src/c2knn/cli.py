"""Command-line entry point.

Subcommands: build, bench, eval, recommend, sweep, verify-theorems,
dataset prepare. Exit codes: 0 ok, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import itertools
import json
import logging
import sys
import time
from dataclasses import fields
from pathlib import Path

from . import __version__
from .analysis import REFERENCE_INTERVAL, check_theorem1, check_theorem2, enumerate_theorem1
from .baselines import build
from .clustering import ClusteringConfig, build_clusters, dump_clusters
from .dataset import Dataset, binarize_and_filter, is_snapshot, load_ratings, make_folds
from .graph import read_graph
from .metrics import avg_sim, quality, recall_at_n, recommend
from .pipeline import ALGORITHMS, BuildParams

log = logging.getLogger("c2knn")

REPORT_VERSION = 1

# flag name -> BuildParams field
PARAM_FLAGS = {
    "k": "k", "b": "b", "t": "t", "N": "N", "rho": "rho", "delta": "delta",
    "max_iters": "max_iters", "lsh_t": "lsh_t", "gf_bits": "gf_bits",
    "exact_sim": "exact_sim", "seed": "seed", "threads": "threads",
}


class UsageError(Exception):
    pass


def read_config(path: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment; keys use - or _."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for no, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{no}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _coerce(field_type, value):
    if isinstance(value, str):
        if field_type in (bool, "bool"):
            return value.lower() in ("1", "true", "yes", "on")
        if field_type in (int, "int"):
            return int(value)
        if field_type in (float, "float"):
            return float(value)
    return value


def params_from_args(args) -> BuildParams:
    values = {}
    types = {f.name: f.type for f in fields(BuildParams)}
    if getattr(args, "config", None):
        for key, value in read_config(args.config).items():
            if key in types:
                values[key] = _coerce(types[key], value)
    for flag, name in PARAM_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[name] = v
    params = BuildParams(**values)
    try:
        params.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return params


def _file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def load_dataset(args) -> Dataset:
    path = args.input
    if is_snapshot(path):
        return Dataset.load(path)
    records = load_ratings(path, args.format)
    return binarize_and_filter(records, args.threshold, args.min_profile)


def _dataset_info(args, ds) -> dict:
    return {"path": str(args.input), "sha256": _file_digest(args.input), **ds.stats()}


def _write_graph(g, path, fmt, ds) -> None:
    if fmt == "binary":
        g.write_binary(path)
    else:
        g.write_text(path, ds.user_ids)


def _exact_graph(ds, params: BuildParams):
    exact_params = BuildParams(**{**params.to_dict(), "exact_sim": True})
    return build(ds, "bruteforce", exact_params)[0]


def _fold_recall(ds, algo, params, n_folds, n_rec, seed):
    folds = make_folds(ds, n_folds, seed)
    graphs = [build(f.train, algo, params)[0] for f in folds]
    return recall_at_n(graphs, folds, n_rec)


def _emit_json(obj, path) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path in (None, "-"):
        print(text)
    else:
        Path(path).write_text(text + "\n", encoding="utf-8")


# ---- subcommands ----------------------------------------------------------

def cmd_build(args) -> int:
    params = params_from_args(args)
    algo = args.algo
    ds = load_dataset(args)
    log.info("dataset: %r", ds)
    graph, report = build(ds, algo, params)
    if args.output:
        _write_graph(graph, args.output, args.graph_format, ds)
    if args.dump_clusters and algo == "c2":
        cfg = ClusteringConfig(t=params.t, b=params.b, N=params.N, seed=params.seed)
        dump_clusters(build_clusters(ds, cfg), args.dump_clusters)
    report = {
        "version": REPORT_VERSION,
        "tool_version": __version__,
        "dataset": _dataset_info(args, ds),
        "algorithm": algo,
        "params": params.to_dict(),
        "build_seconds": report["build_seconds"],
        "oracle_invocations": report["oracle_invocations"],
        "cluster_stats": report.get("cluster_stats"),
        "details": {k: v for k, v in report.items()
                    if k not in ("algorithm", "params", "build_seconds",
                                 "oracle_invocations", "cluster_stats")},
        "quality": None,
        "recall": None,
    }
    if args.evaluate:
        exact = _exact_graph(ds, params)
        report["quality"] = quality(graph, exact, ds)
        report["avg_sim"] = avg_sim(graph, ds)
    if args.recall:
        report["recall"] = _fold_recall(ds, algo, params, args.folds, args.n_rec, params.seed)
    _emit_json(report, args.report)
    return 0


def cmd_eval(args) -> int:
    params = params_from_args(args)
    ds = load_dataset(args)
    graph = read_graph(args.graph, user_index=ds.user_index)
    if args.k is None:
        # text graphs do not store k; compare at the graph's own width
        params = BuildParams(**{**params.to_dict(), "k": graph.k})
    exact = read_graph(args.exact, user_index=ds.user_index) if args.exact \
        else _exact_graph(ds, params)
    out = {
        "version": REPORT_VERSION,
        "dataset": _dataset_info(args, ds),
        "graph": str(args.graph),
        "avg_sim": avg_sim(graph, ds),
        "exact_avg_sim": avg_sim(exact, ds),
        "quality": quality(graph, exact, ds),
        "recall": None,
    }
    if args.recall:
        out["recall"] = _fold_recall(ds, args.algo, params, args.folds, args.n_rec, params.seed)
        out["algorithm"] = args.algo
    _emit_json(out, args.report)
    return 0


def cmd_recommend(args) -> int:
    ds = load_dataset(args)
    graph = read_graph(args.graph, user_index=ds.user_index)
    try:
        u = ds.user_index(args.user)
    except KeyError:
        raise UsageError(f"unknown user {args.user!r}") from None
    items = recommend(graph, ds, u, args.n)
    for i in items:
        print(ds.item_ids[i])
    return 0


def _grid(text: str, cast=int) -> list:
    try:
        vals = [cast(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"cannot parse grid {text!r}") from None
    if not vals:
        raise UsageError("empty parameter grid")
    return vals


SWEEP_COLUMNS = ["t", "b", "N", "build_seconds", "quality", "oracle_invocations", "clusters"]


def sweep_rows(ds, base: BuildParams, ts, bs, Ns):
    exact = _exact_graph(ds, base)
    rows = []
    for b, N, t in itertools.product(bs, Ns, ts):
        p = BuildParams(**{**base.to_dict(), "t": t, "b": b, "N": N})
        g, rep = build(ds, "c2", p)
        rows.append({"t": t, "b": b, "N": N, "build_seconds": rep["build_seconds"],
                     "quality": quality(g, exact, ds),
                     "oracle_invocations": rep["oracle_invocations"],
                     "clusters": rep["cluster_stats"]["clusters"]})
    # more hash functions should not hurt quality at fixed b and N
    for (b, N), grp in itertools.groupby(rows, key=lambda r: (r["b"], r["N"])):
        q = [r["quality"] for r in sorted(grp, key=lambda r: r["t"])]
        if any(q2 < q1 for q1, q2 in zip(q, q[1:])):
            log.warning("sweep audit: quality not monotone in t at b=%d N=%d: %s", b, N,
                        ", ".join(f"{x:.4f}" for x in q))
    return rows


def cmd_sweep(args) -> int:
    base = params_from_args(args)
    ts = _grid(args.t_grid) if args.t_grid is not None else [base.t]
    bs = _grid(args.b_grid) if args.b_grid is not None else [base.b]
    Ns = _grid(args.N_grid) if args.N_grid is not None else [base.N]
    ds = load_dataset(args)
    rows = sweep_rows(ds, base, ts, bs, Ns)
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.DictWriter(out, fieldnames=SWEEP_COLUMNS)
        w.writeheader()
        w.writerows(rows)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def theorem_report(trials: int, seed: int) -> dict:
    ell = 256
    p1 = list(range(0, 192))
    p2 = list(range(64, 256))
    return {
        "version": REPORT_VERSION,
        "theorem1": check_theorem1(p1, p2, 4096, trials, seed, interval=REFERENCE_INTERVAL),
        "theorem1_identical": check_theorem1(p1, p1, 4096, min(trials, 10_000), seed),
        "theorem1_enumeration": enumerate_theorem1([0, 1, 2], [1, 2, 3], 4),
        "theorem2": [check_theorem2(l, b, d, trials, seed)
                     for l, b, d in ((ell, 4096, 0.5), (ell, 4096, 1.5), (64, 512, 1.0),
                                     (512, 4096, 0.25))],
    }


def _markdown(rep: dict) -> str:
    t1 = rep["theorem1"]
    lines = [
        "# Collision bound checks", "",
        f"Co-hash probability (l={t1['ell_union']}, b={t1['b']}, trials={t1['trials']}): "
        f"J={t1['J']:.4f}, P^={t1['p_hat']:.4f}, mean kappa/l={t1['mean_collision_density']:.4f}, "
        f"violations={t1['violations']}, interval containment={t1['interval_containment']:.4f}",
        "", "| l | b | d | threshold | bound | frequency | holds |", "|---|---|---|---|---|---|---|",
    ]
    for r in rep["theorem2"]:
        lines.append(f"| {r['ell_union']} | {r['b']} | {r['d']} | {r['threshold']:.4f} | "
                     f"{r['bound']:.4f} | {r['frequency']:.4f} | {r['holds']} |")
    e = rep["theorem1_enumeration"]
    lines += ["", f"Enumeration (b={e['b']}, {e['functions']} functions): "
              f"P exact={e['p_exact']:.6f}, mean ratio={e['mean_p_h']:.6f}, "
              f"violations={e['violations']}"]
    return "\n".join(lines) + "\n"


def cmd_verify(args) -> int:
    rep = theorem_report(args.trials, args.seed)
    if args.format == "markdown":
        text = _markdown(rep)
        if args.output:
            Path(args.output).write_text(text, encoding="utf-8")
        else:
            print(text, end="")
    else:
        _emit_json(rep, args.output)
    ok = rep["theorem1"]["violations"] == 0 and all(r["holds"] for r in rep["theorem2"])
    return 0 if ok else 1


def cmd_prepare(args) -> int:
    records = load_ratings(args.input, args.format)
    ds = binarize_and_filter(records, args.threshold, args.min_profile)
    ds.save(args.output)
    print(json.dumps({"users": ds.n_users, "items": ds.n_items, "ratings": ds.n_ratings,
                      "dropped_users": ds.dropped_users}))
    return 0


# ---- parser ---------------------------------------------------------------

def _positive(cast):
    def parse(text):
        try:
            v = cast(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid value {text!r}") from None
        if v < 1:
            raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
        return v
    return parse


def _add_input(p):
    p.add_argument("--input", "-i", required=True, help="ratings file or dataset snapshot")
    p.add_argument("--format", choices=("auto", "csv", "tsv"), default="auto")
    p.add_argument("--threshold", type=float, default=3.0,
                   help="ratings strictly above this are positive (default 3)")
    p.add_argument("--min-profile", type=int, default=20,
                   help="minimum raw ratings per user (default 20)")


def _add_params(p):
    pos = _positive(int)
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--k", type=pos, help="neighborhood size (30)")
    p.add_argument("--b", type=pos, help="buckets per hash function (4096)")
    p.add_argument("--t", type=pos, help="hash functions (8)")
    p.add_argument("--N", type=pos, help="max cluster size before splitting (2000)")
    p.add_argument("--rho", type=pos, help="hybrid switch factor (5)")
    p.add_argument("--delta", type=float, help="greedy convergence factor (0.001)")
    p.add_argument("--max-iters", type=pos, help="greedy iteration cap (30)")
    p.add_argument("--lsh-t", type=pos, help="LSH hash functions (10)")
    p.add_argument("--gf-bits", type=pos, help="GoldFinger signature width (1024)")
    p.add_argument("--exact-sim", action="store_true", default=None,
                   help="exact Jaccard instead of GoldFinger estimates")
    p.add_argument("--seed", type=int, help="master seed (0)")
    p.add_argument("--threads", type=pos, help="worker threads (1)")


def _add_build_outputs(p):
    p.add_argument("--output", "-o", help="graph output path")
    p.add_argument("--graph-format", choices=("text", "binary"), default="text")
    p.add_argument("--report", help="JSON report path (default stdout)")
    p.add_argument("--dump-clusters", help="write 'func bucket chain size' per cluster")
    p.add_argument("--evaluate", action="store_true", help="add quality vs the exact graph")
    p.add_argument("--recall", action="store_true", help="add k-fold recall@n")
    p.add_argument("--folds", type=_positive(int), default=5)
    p.add_argument("--n-rec", type=int, default=30)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="c2knn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build a KNN graph")
    p.add_argument("--algo", choices=ALGORITHMS, default="c2")
    _add_input(p)
    _add_params(p)
    _add_build_outputs(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("bench", help="build with a named algorithm")
    p.add_argument("algo", choices=ALGORITHMS)
    _add_input(p)
    _add_params(p)
    _add_build_outputs(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("eval", help="quality (and recall) of a stored graph")
    _add_input(p)
    _add_params(p)
    p.add_argument("--graph", required=True)
    p.add_argument("--exact", help="stored exact graph (computed when omitted)")
    p.add_argument("--recall", action="store_true")
    p.add_argument("--algo", choices=ALGORITHMS, default="c2",
                   help="algorithm rebuilt on each fold for recall")
    p.add_argument("--folds", type=_positive(int), default=5)
    p.add_argument("--n-rec", type=int, default=30)
    p.add_argument("--report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("recommend", help="top-n items for one user")
    _add_input(p)
    p.add_argument("--graph", required=True)
    p.add_argument("--user", required=True, help="external user id")
    p.add_argument("--n", type=int, default=30)
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("sweep", help="time/quality over t, b, N grids (CSV)")
    _add_input(p)
    _add_params(p)
    p.add_argument("--t-grid")
    p.add_argument("--b-grid")
    p.add_argument("--N-grid")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify-theorems", help="Monte Carlo check of the collision bounds")
    p.add_argument("--trials", type=_positive(int), default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("json", "markdown"), default="json")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("dataset", help="dataset utilities")
    dsub = p.add_subparsers(dest="dataset_command", required=True)
    q = dsub.add_parser("prepare", help="ratings file -> dataset snapshot")
    _add_input(q)
    q.add_argument("--output", "-o", required=True)
    q.set_defaults(func=cmd_prepare)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"c2knn: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        log.debug("failure", exc_info=True)
        print(f"c2knn: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
