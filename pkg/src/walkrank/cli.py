"""Command-line entry point: ``walkrank <subcommand> [options] INPUT``.

Exit codes
----------
0
    Success.
2
    Usage, input, parse or domain errors (including a stochastic run
    without ``--seed``).
3
    Numerical failures: no convergence, unreachable sinks or boundary,
    disconnected graphs, too few walk samples.

Results go to stdout, diagnostics to stderr.  Floats are printed with
``repr`` so identical inputs and seeds give byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings

import numpy as np
import scipy.sparse as sp

from . import __version__
from .absorbing import (
    absorption_probabilities,
    expected_visits_from_sources,
    fundamental_matrix,
    heat_equilibrium,
    partition,
)
from .centrality import (
    SecondOrderParams,
    degree_centrality,
    random_walk_betweenness,
    second_order_centrality,
    shortest_path_betweenness,
)
from .errors import (
    ConvergenceError,
    InsufficientSamplesError,
    ParseError,
    ReachabilityError,
    WalkrankError,
)
from .graph import (
    BipartiteGraph,
    DirectedGraph,
    ScoreVector,
    build_transition,
    load_bipartite,
    load_directed_graph,
    open_text,
)
from .ranking import (
    PageRankParams,
    citerank,
    eigenvector_centrality,
    ground_node_rank,
    hits,
    pagerank,
    pagerank_direct,
    totalrank,
    trusted_teleport,
)
from .recommender import (
    HybridParams,
    evaluate,
    heats_scores,
    hybrid_scores,
    predict_rating,
    probs_scores,
    temperature_recommend,
    top_n,
)
from .similarity import (
    commute_time,
    cosine_similarity,
    ectd,
    lrw_similarity,
    pearson_similarity,
    regularized_similarity,
    srw_similarity,
)

SCHEMA = "walkrank/1"
EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
CENTRALITY_MEASURES = ("degree", "betweenness", "rw-betweenness", "second-order",
                       "eigenvector", "pagerank")


class UsageError(Exception):
    """Raised by the parser instead of exiting the process."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _fmt(x):
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _json_number(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _emit_json(out, payload):
    out.write(json.dumps({"schema": SCHEMA, **payload}, indent=2, allow_nan=False))
    out.write("\n")


def _read_label_file(path):
    """One label per line; blank lines and ``#`` comments skipped."""
    with open_text(path) as fh:
        return [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]


def _read_label_values(path):
    out = {}
    with open_text(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = [f.strip() for f in line.rstrip("\r\n").split("\t")]
            if len(fields) != 2:
                raise ParseError(f"expected label<TAB>value, got {line.rstrip()!r}", lineno)
            try:
                out[fields[0]] = float(fields[1])
            except ValueError:
                raise ParseError(f"value {fields[1]!r} is not a number", lineno) from None
    return out


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("WALKRANK_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"WALKRANK_THREADS must be an integer, got {env!r}") from None
    return 1


def _require_seed(args, what):
    if args.seed is None:
        raise UsageError(f"{what} is stochastic; pass --seed explicitly")


def _write_scores(out, fmt, scores: ScoreVector, key="score", extra=None):
    order = scores.ranking()
    if fmt == "json":
        rows = [{"label": scores.label_of(i), key: _json_number(scores[i]), "rank": r}
                for r, i in enumerate(order, start=1)]
        _emit_json(out, {**(extra or {}), "scores": rows})
    else:
        out.write(f"node\t{key}\n")
        for i in order:
            out.write(f"{scores.label_of(i)}\t{_fmt(scores[i])}\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _load_graph(args) -> DirectedGraph:
    return load_directed_graph(args.input, undirected=args.undirected)


def cmd_rank(args, out):
    g = _load_graph(args)
    algo = args.algo
    if algo == "hits":
        res = hits(g, args.tolerance, args.max_iter)
        if args.format == "json":
            rows = [{"label": g.labels[i], "authority": res.authority[i], "hub": res.hub[i],
                     "rank": r} for r, i in enumerate(res.authority.ranking(), start=1)]
            _emit_json(out, {"algorithm": algo, "iterations": res.iterations, "scores": rows})
        else:
            out.write("node\tauthority\thub\n")
            for i in res.authority.ranking():
                out.write(f"{g.labels[i]}\t{_fmt(res.authority[i])}\t{_fmt(res.hub[i])}\n")
        return EXIT_OK
    if algo == "eigenvector":
        scores = eigenvector_centrality(g, args.tolerance, args.max_iter)
    elif algo == "ground":
        scores = ground_node_rank(g, args.tolerance, args.max_iter)
    else:
        P = build_transition(g, args.dangling)
        teleport = None
        if args.trusted:
            teleport = trusted_teleport([g.id_of(x) for x in _read_label_file(args.trusted)],
                                        g.node_count).values
        elif args.teleport:
            weights = _read_label_values(args.teleport)
            v = np.zeros(g.node_count)
            for label, w in weights.items():
                v[g.id_of(label)] = w
            if (v < 0).any() or v.sum() <= 0:
                raise UsageError("teleport weights must be non-negative with a positive sum")
            teleport = v / v.sum()
        if algo == "pagerank":
            scores = pagerank(P, PageRankParams(args.alpha, teleport, args.tolerance, args.max_iter))
        elif algo == "direct":
            scores = pagerank_direct(P, PageRankParams(args.alpha, teleport, args.tolerance,
                                                       args.max_iter))
        elif algo == "totalrank":
            scores = totalrank(P)
        else:  # citerank
            if not args.ages:
                raise UsageError("citerank needs --ages FILE (label<TAB>age)")
            ages_by_label = _read_label_values(args.ages)
            missing = [lab for lab in g.labels if lab not in ages_by_label]
            if missing:
                raise UsageError(f"--ages lacks {len(missing)} nodes, e.g. {missing[0]!r}")
            ages = [ages_by_label[lab] for lab in g.labels]
            scores = citerank(P, ages, args.tau, args.alpha, args.tolerance, args.max_iter)
    _write_scores(out, args.format, scores, extra={"algorithm": algo})
    return EXIT_OK


def cmd_centrality(args, out):
    g = _load_graph(args)
    measures = args.measure or ["degree", "betweenness", "eigenvector", "pagerank", "rw-betweenness"]
    norm = args.normalize
    rows = {}
    for m in measures:
        if m == "degree":
            s = degree_centrality(g, norm)
        elif m == "betweenness":
            s = shortest_path_betweenness(g, norm, endpoints=not args.exclude_endpoints)
        elif m == "rw-betweenness":
            s = random_walk_betweenness(g, norm)
        elif m == "eigenvector":
            s = eigenvector_centrality(g, args.tolerance, args.max_iter).renormalized(norm)
        elif m == "pagerank":
            P = build_transition(g, "uniform")
            s = pagerank(P, PageRankParams(args.alpha, None, args.tolerance,
                                           args.max_iter)).renormalized(norm)
        else:
            _require_seed(args, "second-order centrality")
            params = SecondOrderParams(args.seed, args.walk_steps, args.burn_in, args.min_returns)
            s = second_order_centrality(g, params, norm)
        rows[m] = s.values
    if args.nodes:
        cols = [g.id_of(x) for x in args.nodes.split(",")]
    else:
        cols = list(range(g.node_count))
    if args.format == "json":
        _emit_json(out, {
            "normalization": norm,
            "nodes": [g.labels[i] for i in cols],
            "measures": {m: [_json_number(v[i]) for i in cols] for m, v in rows.items()},
        })
    else:
        out.write("measure\t" + "\t".join(g.labels[i] for i in cols) + "\n")
        for m, v in rows.items():
            out.write(m + "\t" + "\t".join(_fmt(v[i]) for i in cols) + "\n")
    return EXIT_OK


def cmd_similar(args, out):
    if args.kind in ("pearson", "cosine"):
        b = load_bipartite(args.input)
        fn = pearson_similarity if args.kind == "pearson" else cosine_similarity
        s = fn(b, axis=args.axis)
        labels = b.user_labels if args.axis == "user" else b.item_labels
    else:
        g = load_directed_graph(args.input, undirected=True)
        if args.kind == "commute":
            s = commute_time(g)
        elif args.kind == "ectd":
            s = ectd(g)
        elif args.kind == "lrw":
            s = lrw_similarity(g, args.steps)
        elif args.kind == "srw":
            s = srw_similarity(g, args.steps)
        else:
            s = regularized_similarity(build_transition(g, "uniform"), args.alpha)
        labels = g.labels
    index = {lab: k for k, lab in enumerate(labels)}
    if args.node not in index:
        raise UsageError(f"unknown node {args.node!r}")
    pairs = s.most_similar(index[args.node], args.top)
    key = "distance" if s.is_distance else "similarity"
    if args.format == "json":
        _emit_json(out, {"kind": args.kind, "node": args.node,
                         "neighbors": [{"node": labels[j], key: _json_number(v)} for j, v in pairs]})
    else:
        out.write(f"node\t{key}\n")
        for j, v in pairs:
            out.write(f"{labels[j]}\t{_fmt(v)}\n")
    return EXIT_OK


def _item_projection(b: BipartiteGraph) -> DirectedGraph:
    """Items linked with weight equal to their number of common users."""
    a = b.adjacency
    co = (a.T @ a).tolil()
    co.setdiag(0)
    return DirectedGraph(b.item_labels, sp.csr_matrix(co))


def cmd_recommend(args, out):
    b = load_bipartite(args.input)
    user = b.user_id(args.user)
    collected = b.collected(user)
    if args.method == "temperature":
        graph = _item_projection(b)
        if b.has_ratings:
            r = b.rating_matrix[user, collected]
            liked = collected[r >= b.user_mean_rating[user]]
            disliked = collected[r < b.user_mean_rating[user]]
        else:
            liked, disliked = collected, []
        rec = temperature_recommend(graph, liked, disliked, args.top)
    else:
        if args.method == "probs":
            scores = probs_scores(b, user, args.theta)
        elif args.method == "heats":
            scores = heats_scores(b, user)
        elif args.method == "hybrid":
            scores = hybrid_scores(b, user, HybridParams(args.lam, args.theta))
        else:  # cf
            if not b.has_ratings:
                raise UsageError("cf needs a ratings column")
            sim = pearson_similarity(b, "user")
            mu = b.user_mean_rating[user]
            pred = np.full(b.item_count, mu)
            for item in range(b.item_count):
                p = predict_rating(b, sim, user, item)
                if p is not None:
                    pred[item] = p
            scores = ScoreVector(pred, "raw", b.item_labels)
        rec = top_n(scores, collected, args.top, user)
    rows = [(b.item_labels[i], score) for i, score in rec.items]
    if args.format == "json":
        _emit_json(out, {
            "method": args.method,
            "user": args.user,
            "excluded": [b.item_labels[i] for i in sorted(rec.excluded)],
            "items": [{"item": lab, "score": _json_number(v)} for lab, v in rows],
        })
    else:
        out.write("item\tscore\n")
        for lab, v in rows:
            out.write(f"{lab}\t{_fmt(v)}\n")
    return EXIT_OK


def cmd_absorb(args, out):
    g = _load_graph(args)
    if args.boundary:
        values = _read_label_values(args.boundary)
        temps = heat_equilibrium(g, {g.id_of(k): v for k, v in values.items()})
        if args.format == "json":
            _emit_json(out, {"temperatures": {g.labels[i]: _json_number(t)
                                              for i, t in enumerate(temps.values)}})
        else:
            out.write("node\ttemperature\n")
            for i, t in enumerate(temps.values):
                out.write(f"{g.labels[i]}\t{_fmt(t)}\n")
        return EXIT_OK
    if bool(args.sinks) == bool(args.sources):
        raise UsageError("absorb needs exactly one of --sinks, --sources or --boundary")
    P = build_transition(g, args.dangling)
    if args.sinks:
        p = partition(P, [g.id_of(x) for x in _read_label_file(args.sinks)], "sink")
        f = absorption_probabilities(p)
        _, times = fundamental_matrix(p)
        header = [g.labels[j] for j in p.sinks] + ["absorption_time"]
        rows = [(g.labels[t], list(f[k]) + [times[k]]) for k, t in enumerate(p.transients)]
    else:
        p = partition(P, [g.id_of(x) for x in _read_label_file(args.sources)], "source")
        h = expected_visits_from_sources(p)
        header = [g.labels[j] for j in p.sinks]
        rows = [(g.labels[t], list(h[:, k])) for k, t in enumerate(p.transients)]
    if args.format == "json":
        _emit_json(out, {"columns": header,
                         "rows": {lab: [_json_number(v) for v in vals] for lab, vals in rows}})
    else:
        out.write("node\t" + "\t".join(header) + "\n")
        for lab, vals in rows:
            out.write(lab + "\t" + "\t".join(_fmt(v) for v in vals) + "\n")
    return EXIT_OK


def cmd_evaluate(args, out):
    _require_seed(args, "evaluation")
    b = load_bipartite(args.input)
    report = evaluate(b, args.method, args.probe, args.seed, args.top,
                      lam=args.lam, theta=args.theta, threads=_threads(args))
    metrics = {k: (_json_number(v) if isinstance(v, float) else v)
               for k, v in report.as_dict().items()}
    if args.format == "json":
        _emit_json(out, {"method": args.method, "probe": args.probe, "seed": args.seed,
                         "metrics": metrics})
    else:
        out.write("metric\tvalue\n")
        for k, v in report.as_dict().items():
            out.write(f"{k}\t{_fmt(v) if isinstance(v, float) else v}\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def build_parser():
    p = _Parser(prog="walkrank", description="Random-walk ranking, centrality, "
                "similarity and recommendation on graphs stored as TSV edge lists.")
    p.add_argument("--version", action="version", version=f"walkrank {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("input", help="TSV input file (gzip accepted)")
    common.add_argument("--format", choices=("tsv", "json"))
    common.add_argument("--threads", type=_positive_int,
                        help="worker cap (default: $WALKRANK_THREADS or 1)")
    common.add_argument("--seed", type=int, help="RNG seed for stochastic runs")

    graph = _Parser(add_help=False)
    graph.add_argument("--undirected", action="store_true",
                       help="mirror every edge of the input")
    graph.add_argument("--tolerance", type=float, default=1e-12)
    graph.add_argument("--max-iter", type=_positive_int, default=1000)

    r = sub.add_parser("rank", parents=[common, graph], help="PageRank and relatives")
    r.add_argument("--algo", default="pagerank",
                   choices=("pagerank", "direct", "totalrank", "hits", "eigenvector",
                            "citerank", "ground"))
    r.add_argument("--alpha", type=float, default=0.85)
    r.add_argument("--dangling", choices=("uniform", "self-loop", "error"), default="uniform")
    r.add_argument("--teleport", help="label<TAB>weight file for a personalized jump vector")
    r.add_argument("--trusted", help="file of trusted labels; jumps go to them uniformly")
    r.add_argument("--ages", help="label<TAB>age file for citerank")
    r.add_argument("--tau", type=float, default=2.6)
    r.set_defaults(func=cmd_rank, default_format="tsv")

    c = sub.add_parser("centrality", parents=[common, graph], help="node centralities")
    c.add_argument("--measure", action="append", choices=CENTRALITY_MEASURES,
                   help="repeat for several rows (default: all deterministic measures)")
    c.add_argument("--normalize", default="mean-one",
                   choices=("mean-one", "sum-one", "max-one", "raw"))
    c.add_argument("--alpha", type=float, default=0.85)
    c.add_argument("--nodes", help="comma-separated labels to report (default: all)")
    c.add_argument("--exclude-endpoints", action="store_true",
                   help="conventional betweenness without path endpoints")
    c.add_argument("--walk-steps", type=_positive_int, default=10_000_000)
    c.add_argument("--burn-in", type=int)
    c.add_argument("--min-returns", type=_positive_int, default=50)
    c.set_defaults(func=cmd_centrality, default_format="tsv")

    s = sub.add_parser("similar", parents=[common], help="most similar nodes")
    s.add_argument("--kind", required=True,
                   choices=("commute", "ectd", "lrw", "srw", "regularized", "pearson", "cosine"))
    s.add_argument("--node", required=True)
    s.add_argument("--top", type=_positive_int, default=10)
    s.add_argument("--steps", type=_positive_int, default=3, help="walk length for lrw/srw")
    s.add_argument("--alpha", type=float, default=0.5, help="regularization strength")
    s.add_argument("--axis", choices=("user", "item"), default="user")
    s.set_defaults(func=cmd_similar, default_format="tsv")

    rec = sub.add_parser("recommend", parents=[common], help="top-N items for a user")
    rec.add_argument("--method", default="hybrid",
                     choices=("probs", "heats", "hybrid", "cf", "temperature"))
    rec.add_argument("--lambda", dest="lam", type=float, default=0.5)
    rec.add_argument("--theta", type=float, default=0.0)
    rec.add_argument("--user", required=True)
    rec.add_argument("--top", type=_positive_int, default=10)
    rec.set_defaults(func=cmd_recommend, default_format="json")

    a = sub.add_parser("absorb", parents=[common, graph], help="absorbing random walks")
    a.add_argument("--sinks", help="file of sink labels")
    a.add_argument("--sources", help="file of source labels")
    a.add_argument("--boundary", help="label<TAB>temperature file")
    a.add_argument("--dangling", choices=("uniform", "self-loop", "error"), default="uniform")
    a.set_defaults(func=cmd_absorb, default_format="tsv")

    e = sub.add_parser("evaluate", parents=[common], help="leave-probe-out evaluation")
    e.add_argument("--method", default="probs", choices=("probs", "heats", "hybrid", "random"))
    e.add_argument("--lambda", dest="lam", type=float, default=0.5)
    e.add_argument("--theta", type=float, default=0.0)
    e.add_argument("--probe", type=float, default=0.1)
    e.add_argument("--top", type=_positive_int, default=20)
    e.set_defaults(func=cmd_evaluate, default_format="json")
    return p


def run(argv=None, stdout=None, stderr=None) -> int:
    """Execute one command and return its exit code."""
    out = stdout or sys.stdout
    err = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=err)
        return EXIT_INPUT
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)
    args.format = args.format or args.default_format
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            warnings.showwarning = (
                lambda msg, *a, **k: print(f"walkrank: warning: {msg}", file=err))
            return args.func(args, out)
    except UsageError as exc:
        print(f"walkrank {args.command}: error: {exc}", file=err)
        return EXIT_INPUT
    except (ConvergenceError, ReachabilityError, InsufficientSamplesError) as exc:
        print(f"walkrank {args.command}: error: {exc}", file=err)
        return EXIT_NUMERIC
    except (WalkrankError, OSError, UnicodeDecodeError) as exc:
        print(f"walkrank {args.command}: error: {exc}", file=err)
        return EXIT_INPUT


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
