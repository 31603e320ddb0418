"""Command line entry point: ``bufferless {generate,route,simulate,sweep}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness
from .engine import run, write_trace
from .errors import BufferlessError, ConfigurationError
from .metrics import MetricsReport
from .netgen import price_generate, read_edgelist, write_edgelist
from .routing import build_tables, dump_table

log = logging.getLogger("bufferless")


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="flat YAML key/value file")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override one config key (repeatable)")
    common.add_argument("--seed", type=int, help="replace base_seed")
    common.add_argument("-o", "--output", help="output path")
    common.add_argument("--trace", action="store_true",
                        help="simulate: also write the per-step trace CSV")
    common.add_argument("-v", "--verbose", action="store_true")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="bufferless",
                                     description="Bufferless transmission on Price-model networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("generate", parents=[common], help="write a Price-model graph as an edge list")

    route = sub.add_parser("route", parents=[common], help="dump the routing table of a graph")
    route.add_argument("graph", help="edge-list file")
    route.add_argument("--alpha", type=float, required=True)

    sim = sub.add_parser("simulate", parents=[common], help="run once and print the metrics")
    sim.add_argument("--graph", help="use this edge-list file instead of generating one")

    sweep = sub.add_parser("sweep", parents=[common], help="run a parameter sweep to CSV")
    sweep.add_argument("--paper", action="store_true",
                       help=f"use {harness.FULL_REPS} replications per point")
    sweep.add_argument("--reps", type=int, help="replications per point")
    sweep.add_argument("-j", "--jobs", type=int, default=1, help="worker processes")
    return parser


def _output(args, default_name: str) -> Path:
    path = Path(args.output) if args.output else harness.default_output_dir() / default_name
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _base_seed(raw: dict) -> int:
    return harness.coerce("base_seed", raw.get("base_seed", 0))


def _raw_config(args) -> dict:
    raw = harness.load_config(args.config, args.overrides)
    if args.seed is not None:
        raw["base_seed"] = args.seed
    return raw


def _split(params: dict) -> tuple[dict, dict]:
    topology = {k: v for k, v in params.items() if k in harness.TOPOLOGY_KEYS}
    transport = {k: v for k, v in params.items() if k not in harness.TOPOLOGY_KEYS}
    return topology, transport


def cmd_generate(args) -> None:
    raw = _raw_config(args)
    topology, _ = _split(harness.model_params(raw))
    seed = harness.derive_seeds(_base_seed(raw), 0, 0)[0]
    g = price_generate(harness.resolve_topology(topology, seed))
    out = _output(args, "graph.txt")
    write_edgelist(g, out)
    log.info("wrote %s (%d nodes, %d edges)", out, g.n, g.edge_count)


def cmd_route(args) -> None:
    g = read_edgelist(args.graph)
    table = build_tables(g, args.alpha)
    out = _output(args, "routes.txt")
    dump_table(table, out)
    log.info("wrote %s", out)


def cmd_simulate(args) -> None:
    raw = _raw_config(args)
    topology, transport = _split(harness.model_params(raw))
    graph_seed, engine_seed = harness.derive_seeds(_base_seed(raw), 0, 0)
    engine, alpha = harness.resolve_transport(transport, engine_seed)
    if args.graph:
        g = read_edgelist(args.graph)
    else:
        g = price_generate(harness.resolve_topology(topology, graph_seed))
    table = build_tables(g, alpha)
    result = run(g, table, engine, trace=args.trace)
    ledger, rows = result if args.trace else (result, None)
    report = MetricsReport.from_ledger(ledger)
    if args.output:
        out = _output(args, "report.csv")
        with open(out, "w", newline="") as fh:
            harness.write_report_csv(report, fh)
    else:
        harness.write_report_csv(report, sys.stdout)
    if rows is not None:
        trace_path = (Path(args.output).with_suffix(".trace.csv") if args.output
                      else _output(args, "trace.csv"))
        with open(trace_path, "w", newline="") as fh:
            write_trace(rows, fh)
        log.info("wrote %s", trace_path)


def cmd_sweep(args) -> None:
    raw = _raw_config(args)
    if args.paper:
        raw["reps"] = harness.FULL_REPS
    if args.reps is not None:
        raw["reps"] = args.reps
    spec = harness.ExperimentSpec.from_mapping(raw)
    out = _output(args, f"sweep_{spec.swept}.csv")
    rows = harness.run_sweep(
        spec, jobs=args.jobs,
        progress=lambda i, v: log.info("%s=%s (%d/%d)", spec.swept, v, i + 1, len(spec.values)))
    with open(out, "w", newline="") as fh:
        harness.write_sweep_csv(rows, fh)
    log.info("wrote %s", out)


COMMANDS = {"generate": cmd_generate, "route": cmd_route, "simulate": cmd_simulate,
            "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        COMMANDS[args.command](args)
    except ConfigurationError as exc:
        where = f" [{exc.field}]" if exc.field else ""
        print(f"bufferless: invalid configuration{where}: {exc}", file=sys.stderr)
        return 1
    except (BufferlessError, OSError) as exc:
        print(f"bufferless: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
