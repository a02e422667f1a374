"""Command-line interface.

Subcommands cover the full pipeline: ``generate`` (grow a graph),
``simulate`` (sample data from it), ``learn`` (run one structure learner),
``bench`` (execute an experiment grid), ``stats`` (topology comparisons
from a runs CSV), and ``plot`` (SVG panels from a runs CSV).

Exit codes: 0 on success, 1 on usage/configuration/data errors, 2 when a
benchmark completed but some runs failed.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .bench import (
    ConfigError,
    compare_topologies,
    emit_csv,
    emit_pvalues_csv,
    load_config,
    parse_csv,
    run_grid,
)
from .citests import TEST_KINDS, CiTestKind, build_tester
from .graphs import Dag, GraphError, read_graph, to_dot, write_graph
from .learners import ALGORITHMS, LearnParams, learn_structure
from .plots import emit_plots
from .sem import MODELS, SemSpec, read_data_csv, simulate_dataset, write_data_csv
from .topology import TopologySpec, generate_pa_dag

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bslbench",
        description="Structure-learning benchmarks on preferential-attachment graphs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="grow a preferential-attachment DAG")
    p_gen.add_argument("--nodes", type=int, required=True, help="number of nodes")
    p_gen.add_argument("--gamma", type=float, required=True, help="attachment exponent")
    p_gen.add_argument("--seed", type=int, default=0, help="generator seed")
    p_gen.add_argument("--out", required=True, help="output graph file")
    p_gen.add_argument("--dot", default=None, help="also write Graphviz DOT here")
    p_gen.set_defaults(func=_cmd_generate)

    p_sim = sub.add_parser("simulate", help="sample SEM data on a graph")
    p_sim.add_argument("--graph", required=True, help="input graph file (dag)")
    p_sim.add_argument("--model", choices=MODELS, required=True)
    p_sim.add_argument("--sigma", type=float, required=True, help="noise level")
    p_sim.add_argument("--samples", type=int, required=True, help="sample count")
    p_sim.add_argument("--weight", type=float, default=1.0, help="shared edge weight")
    p_sim.add_argument("--seed", type=int, default=0, help="noise seed")
    p_sim.add_argument("--out", required=True, help="output CSV file")
    p_sim.set_defaults(func=_cmd_simulate)

    p_learn = sub.add_parser("learn", help="learn a structure from data")
    p_learn.add_argument("--data", required=True, help="input data CSV")
    p_learn.add_argument("--algorithm", choices=ALGORITHMS, required=True)
    p_learn.add_argument("--test", choices=TEST_KINDS, default="fisher_z")
    p_learn.add_argument("--alpha", type=float, default=0.05)
    p_learn.add_argument("--max-condset", type=int, default=None)
    p_learn.add_argument("--out", required=True, help="output graph file (pdag)")
    p_learn.add_argument("--trace", default=None, help="write per-test CSV log here")
    p_learn.set_defaults(func=_cmd_learn)

    p_bench = sub.add_parser("bench", help="run an experiment grid")
    p_bench.add_argument("--config", required=True, help="JSON grid config")
    p_bench.add_argument("--seed", type=int, default=None, help="override master seed")
    p_bench.add_argument("--workers", type=int, default=None, help="override worker count")
    p_bench.add_argument("--eval-mode", choices=("moral", "cpdag-skeleton"), default=None)
    p_bench.add_argument("--timings", action="store_true", help="record wall-clock runtimes")
    p_bench.add_argument("--trace", action="store_true", help="write per-run CI-test logs")
    p_bench.add_argument("--out", required=True, help="output directory")
    p_bench.set_defaults(func=_cmd_bench)

    p_stats = sub.add_parser("stats", help="topology comparisons from a runs CSV")
    p_stats.add_argument("--runs", required=True, help="runs CSV from bench")
    p_stats.add_argument("--pair", nargs=2, default=("B", "U"), metavar=("A", "B"))
    p_stats.add_argument("--alpha", type=float, default=0.05)
    p_stats.add_argument("--out", required=True, help="output p-values CSV")
    p_stats.set_defaults(func=_cmd_stats)

    p_plot = sub.add_parser("plot", help="SVG panels from a runs CSV")
    p_plot.add_argument("--runs", required=True, help="runs CSV from bench")
    p_plot.add_argument("--pair", nargs=2, default=("B", "U"), metavar=("A", "B"))
    p_plot.add_argument("--alpha", type=float, default=0.05)
    p_plot.add_argument("--out-dir", required=True, help="output directory")
    p_plot.set_defaults(func=_cmd_plot)

    return parser


def _cmd_generate(args: argparse.Namespace) -> int:
    dag = generate_pa_dag(TopologySpec(args.nodes, args.gamma, args.seed))
    write_graph(args.out, dag)
    if args.dot:
        Path(args.dot).write_text(to_dot(dag), encoding="utf-8")
    print(f"wrote {args.out}: {dag.n_nodes} nodes, {dag.n_edges} edges")
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    graph = read_graph(args.graph)
    if not isinstance(graph, Dag):
        raise GraphError(f"{args.graph}: simulate requires a dag")
    spec = SemSpec(args.model, args.sigma, args.weight)
    data = simulate_dataset(graph, spec, args.samples, args.seed)
    write_data_csv(args.out, data)
    print(f"wrote {args.out}: {data.n_samples} samples x {data.n_vars} variables")
    return 0


def _cmd_learn(args: argparse.Namespace) -> int:
    data = read_data_csv(args.data)
    params = LearnParams(
        args.algorithm,
        CiTestKind(args.test, args.alpha),
        max_condset=args.max_condset,
    )
    trace_rows: list | None = [] if args.trace else None
    if trace_rows is None:
        trace_fn = None
    else:
        def trace_fn(x, y, z, res, _rows=trace_rows):
            _rows.append((x, y, z, res))
    tester = build_tester(data, params.test)
    pdag, _ = learn_structure(None, params, tester=tester, trace=trace_fn)
    write_graph(args.out, pdag)
    if trace_rows is not None:
        with open(args.trace, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("x", "y", "z", "statistic", "p_value", "independent", "note"))
            for x, y, z, res in trace_rows:
                writer.writerow(
                    (
                        x,
                        y,
                        " ".join(str(i) for i in z),
                        format(res.statistic, ".17g"),
                        format(res.p_value, ".17g"),
                        "true" if res.independent else "false",
                        res.note or "",
                    )
                )
    n_dir = len(pdag.directed_edges)
    n_und = len(pdag.undirected_edges)
    print(
        f"wrote {args.out}: {n_dir} directed + {n_und} undirected edges, "
        f"{tester.n_tests} CI tests"
    )
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
    if args.workers is not None:
        config = replace(config, workers=args.workers)
    if args.eval_mode is not None:
        config = replace(config, eval_mode=args.eval_mode)
    if args.timings:
        config = replace(config, timings=True)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_dir = out_dir / "trace" if args.trace else None
    records = run_grid(config, trace_dir=trace_dir)
    runs_path = out_dir / "runs.csv"
    emit_csv(records, runs_path)
    labels = [t.label for t in config.topologies]
    pair = (labels[0], labels[-1])
    comparisons = compare_topologies(records, pair=pair, alpha=config.alpha)
    pvalues_path = out_dir / "pvalues.csv"
    emit_pvalues_csv(comparisons, pvalues_path)
    plot_paths = emit_plots(records, out_dir / "plots", alpha=config.alpha, pair=pair)
    n_failed = sum(1 for r in records if r.status != "ok")
    print(f"wrote {runs_path}: {len(records)} records, {n_failed} failed")
    print(f"wrote {pvalues_path}: {len(comparisons)} comparisons ({pair[0]} vs {pair[1]})")
    print(f"wrote {len(plot_paths)} panels under {out_dir / 'plots'}")
    return 2 if n_failed else 0


def _cmd_stats(args: argparse.Namespace) -> int:
    records = parse_csv(args.runs)
    comparisons = compare_topologies(records, pair=tuple(args.pair), alpha=args.alpha)
    emit_pvalues_csv(comparisons, args.out)
    n_sig = sum(1 for c in comparisons if c.significant)
    print(f"wrote {args.out}: {len(comparisons)} comparisons, {n_sig} significant")
    return 0


def _cmd_plot(args: argparse.Namespace) -> int:
    records = parse_csv(args.runs)
    written = emit_plots(records, args.out_dir, alpha=args.alpha, pair=tuple(args.pair))
    if not written:
        raise ValueError("no scorable records to plot")
    for path in written:
        print(f"wrote {path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage problems and 0 for --help/--version;
        # fold usage problems into exit code 1.
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except (ConfigError, GraphError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
