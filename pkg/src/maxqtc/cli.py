"""Command-line interface: ``maxqtc <subcommand> ...``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import formats, maxqnorm
from .expander_graphs import BipartiteGraph, ramanujan_threshold, random_biregular, random_regular
from .experiments import (ExperimentSpec, gen_synthetic, generalization_error, run_experiment,
                          sample_complexity_report, sample_observations, summarize)
from .hypergraph import (build_quasi_hypergraph, build_walk_hypergraph,
                         fuzz_mixing, hypergraph_from_edges)
from .solver import SolverConfig, coordinate_descent
from .tensor_core import DenseTensor, FactorSet, evaluate, frobenius_norm


def cmd_gen_graph(args):
    G = random_regular(args.n, args.d, args.seed)
    formats.write_graph(G, args.out)


def cmd_gen_bigraph(args):
    G = random_biregular(args.n1, args.n2, args.d1, args.d2, args.seed)
    formats.write_bigraph(G, args.out)


def cmd_spectra(args):
    G = formats.read_graph(args.input)
    if isinstance(G, BipartiteGraph):
        print(f"lambda2 {G.lambda2!r}")
        print(f"top {math.sqrt(G.d1 * G.d2)!r}")
        print(f"ramanujan {math.sqrt(G.d1 - 1) + math.sqrt(G.d2 - 1)!r}")
    else:
        print(f"lambda2 {G.lambda2!r}")
        print(f"ramanujan {ramanujan_threshold(G.d)!r}")


def cmd_build_hypergraph(args):
    graphs = [formats.read_graph(p) for p in args.graph]
    if len(graphs) == 1 and not isinstance(graphs[0], BipartiteGraph):
        if args.t is None:
            raise ValueError("--t is required for a regular base graph")
        H = build_walk_hypergraph(graphs[0], args.t)
    else:
        if not all(isinstance(g, BipartiteGraph) for g in graphs):
            raise ValueError("a chain must consist of bipartite graphs only")
        H = build_quasi_hypergraph(graphs)
    formats.write_hyperedges(H.hyperedge_set(), args.out)


def cmd_verify_mixing(args):
    H = hypergraph_from_edges(formats.read_hyperedges(args.hypergraph))
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    violations = 0
    try:
        w = csv.writer(out)
        w.writerow(["trial", *[f"alpha{i + 1}" for i in range(H.t)],
                    "discrepancy", "tight_bound", "crude_bound", "violated"])
        trial = 0
        for chunk in fuzz_mixing(H, args.trials, args.seed):
            tight = np.broadcast_to(chunk["tight"], chunk["discrepancy"].shape)
            bad = (chunk["discrepancy"] > tight + 1e-12) | (tight > chunk["crude"] + 1e-12)
            violations += int(bad.sum())
            for k in range(chunk["discrepancy"].size):
                trial += 1
                w.writerow([trial, *[repr(float(a)) for a in chunk["alphas"][:, k]],
                            repr(float(chunk["discrepancy"][k])), repr(float(tight[k])),
                            repr(float(chunk["crude"])), int(bad[k])])
    finally:
        if out is not sys.stdout:
            out.close()
    print(f"violations {violations}", file=sys.stderr)
    if violations:
        raise RuntimeError(f"{violations} mixing-bound violations")


def cmd_gen_tensor(args):
    dims = args.dims if args.dims else [args.n] * args.t
    f = gen_synthetic(dims, r=args.r, seed=args.seed)
    if args.factors_out:
        formats.write_factors(f, args.factors_out)
    if args.out:
        formats.write_tensor(evaluate(f), args.out)


def _load_truth(args):
    if getattr(args, "factors", None):
        return formats.read_factors(args.factors)
    if getattr(args, "tensor", None):
        return formats.read_tensor(args.tensor)
    return None


def cmd_sample(args):
    truth = _load_truth(args)
    if truth is None:
        raise ValueError("one of --tensor or --factors is required")
    H = formats.read_hyperedges(args.edges)
    obs = sample_observations(truth, H.edges, args.noise, args.seed)
    formats.write_observations(obs, args.out)


def cmd_complete(args):
    truth = _load_truth(args)
    if args.obs:
        obs = formats.read_observations(args.obs)
    elif truth is not None and args.edges:
        obs = sample_observations(truth, formats.read_hyperedges(args.edges).edges)
    else:
        raise ValueError("need --obs, or --edges with --tensor/--factors")
    cfg = SolverConfig.from_text(Path(args.config).read_text()) if args.config else SolverConfig()
    if args.delta_coeff is not None:
        cfg.delta = args.delta_coeff * math.sqrt(len(obs))
    if args.r_fit is not None:
        cfg.r_fit = args.r_fit
    f, trace = coordinate_descent(obs, cfg)
    formats.write_factors(f, args.factors_out)
    if args.trace_out:
        trace.write_csv(args.trace_out)
    print(f"iters {len(trace)} converged {int(trace.converged)} cost {trace.cost[-1]!r}")
    if isinstance(truth, FactorSet):
        print(f"gen_error {generalization_error(f, truth)!r}")
    elif isinstance(truth, DenseTensor):
        err = frobenius_norm(evaluate(f).values - truth.values) / frobenius_norm(truth)
        print(f"gen_error {err!r}")


def cmd_experiment(args):
    spec = ExperimentSpec.from_json(Path(args.spec).read_text())
    if args.out:
        spec.output = args.out
    if not spec.output:
        raise ValueError("no output path: set 'output' in the spec or pass --out")
    rows = run_experiment(spec, jobs=args.jobs)
    for s in summarize(rows):
        print(f"d={s['d']} r_fit={s['r_fit']} runs={s['runs']} failed={s['failed']} "
              f"mean={s['mean_gen_error']:.4g} se={s['se_gen_error']:.3g}")


def cmd_report_bounds(args):
    report = {"t": args.t, "r": args.r,
              "C_t": maxqnorm.error_bound_constant(args.t),
              "rank_bound": maxqnorm.rank_bound(args.t, args.r),
              "conjectured_rank_bound": math.sqrt(args.r ** (args.t - 1))}
    lam, d = args.lam, args.d
    if args.graph:
        G = formats.read_graph(args.graph)
        if isinstance(G, BipartiteGraph):
            raise ValueError("report-bounds expects a regular base graph")
        lam, d = G.lambda2, G.d
    if lam is not None and d is not None:
        report.update(lam=lam, d=d, crude_mixing=(2 * args.t - 3) * lam / (4 * d))
        maxq = args.maxq if args.maxq is not None else maxqnorm.rank_bound(args.t, args.r)
        report.update(maxq=maxq, mse_bound=maxqnorm.error_bound_rhs(args.t, maxq, lam, d))
        if args.n:
            report["num_edges"] = args.n * d ** (args.t - 1)
    if args.eps is not None:
        report["sample_complexity"] = sample_complexity_report(
            args.t, args.r, args.eps, report.get("num_edges"), args.n)
    print(json.dumps(report, indent=2))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maxqtc", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-graph", help="random d-regular expander")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_graph)

    s = sub.add_parser("gen-bigraph", help="random biregular bipartite graph")
    for name in ("n1", "n2", "d1", "d2"):
        s.add_argument(f"--{name}", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_bigraph)

    s = sub.add_parser("spectra", help="second eigenvalue of a graph file")
    s.add_argument("--in", dest="input", required=True)
    s.set_defaults(func=cmd_spectra)

    s = sub.add_parser("build-hypergraph", help="walk or chain hypergraph edge list")
    s.add_argument("--graph", nargs="+", required=True,
                   help="one regular graph, or a chain of bipartite graphs")
    s.add_argument("--t", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_build_hypergraph)

    s = sub.add_parser("verify-mixing", help="randomized subset fuzzing of the mixing bound")
    s.add_argument("--hypergraph", required=True)
    s.add_argument("--trials", type=int, default=10**5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_verify_mixing)

    s = sub.add_parser("gen-tensor", help="random low-rank truth tensor with RMS 1")
    s.add_argument("--n", type=int)
    s.add_argument("--t", type=int, default=3)
    s.add_argument("--dims", type=int, nargs="+")
    s.add_argument("--r", type=int, default=3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.add_argument("--factors-out")
    s.set_defaults(func=cmd_gen_tensor)

    s = sub.add_parser("sample", help="observe a tensor on a hyperedge set")
    s.add_argument("--tensor")
    s.add_argument("--factors")
    s.add_argument("--edges", required=True)
    s.add_argument("--noise", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("complete", help="single max-qnorm completion solve")
    s.add_argument("--obs")
    s.add_argument("--tensor")
    s.add_argument("--factors")
    s.add_argument("--edges")
    s.add_argument("--config")
    s.add_argument("--delta-coeff", type=float)
    s.add_argument("--r-fit", type=int)
    s.add_argument("--factors-out", required=True)
    s.add_argument("--trace-out")
    s.set_defaults(func=cmd_complete)

    s = sub.add_parser("experiment", help="run an experiment grid from a JSON spec")
    s.add_argument("--spec", required=True)
    s.add_argument("--out")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("report-bounds", help="theorem constants and bound values")
    s.add_argument("--t", type=int, required=True)
    s.add_argument("--r", type=int, default=1)
    s.add_argument("--lambda", dest="lam", type=float)
    s.add_argument("--d", type=int)
    s.add_argument("--n", type=int)
    s.add_argument("--graph")
    s.add_argument("--maxq", type=float)
    s.add_argument("--eps", type=float)
    s.set_defaults(func=cmd_report_bounds)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        args.func(args)
    except Exception as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
