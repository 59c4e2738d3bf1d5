"""Command-line entry point: ``avcoord run``, ``avcoord matrix`` and ``avcoord loops``.

Exit status is 0 on success, 1 when an input fails validation and 2 on
I/O errors (missing files, unwritable output directories).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from .config import CoordinationConfig
from .engine import Event, run_scenario
from .errors import SimulationError
from .experiments import (
    CAR_LEVELS,
    OBSTACLE_LEVELS,
    MovementPattern,
    build_scenario,
    derive_seed,
    run_matrix,
    write_outputs,
)
from .metrics import ScenarioDescriptor, detect_loops, visit_logs_from_trace
from .network import RoadNetwork, generate_network, load_network

DEFAULT_NETWORK = (86, 161)
DEFAULT_NETWORK_SEED = 1

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2


def _node_edge_counts(text: str) -> tuple[int, int]:
    try:
        n, m = (int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N,M (two integers), got {text!r}") from None
    return n, m


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _add_network_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--network", type=Path, help="GraphML network file")
    src.add_argument("--generate", type=_node_edge_counts, metavar="N,M",
                     help="generate a network with N nodes and M directed edges (default 86,161)")
    p.add_argument("--network-seed", type=int, default=DEFAULT_NETWORK_SEED,
                   help="seed for --generate (default %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="avcoord", description="Multi-vehicle obstacle coordination simulator."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one scenario cell")
    run.add_argument("--cars", type=_positive_int, default=CAR_LEVELS[0])
    run.add_argument("--obstacles", type=int, default=OBSTACLE_LEVELS[0])
    run.add_argument("--pattern", default="left-right", help="left-right or random")
    run.add_argument("--config", type=int, action="append", choices=range(1, 7),
                     help="configuration 1..6 (repeatable; default all six)")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--trials", type=_positive_int, default=1)
    run.add_argument("--tick", type=float, default=0.1)
    run.add_argument("--out", type=Path, required=True)
    _add_network_args(run)

    matrix = sub.add_parser("matrix", help="run the full factorial experiment matrix")
    matrix.add_argument("--trials", type=_positive_int, default=3)
    matrix.add_argument("--base-seed", type=int, default=0)
    matrix.add_argument("--parallelism", type=_positive_int, default=1)
    matrix.add_argument("--tick", type=float, default=0.1)
    matrix.add_argument("--out", type=Path, required=True)
    _add_network_args(matrix)

    loops = sub.add_parser("loops", help="report revisited nodes in a scenario trace")
    loops.add_argument("--trace", type=Path, required=True)
    loops.add_argument("--threshold", type=_positive_int, default=2)
    return parser


def _network(args: argparse.Namespace) -> RoadNetwork:
    if args.network is not None:
        with open(args.network, "rb") as fh:
            return load_network(fh)
    n, m = args.generate or DEFAULT_NETWORK
    return generate_network(n, m, args.network_seed)


def _cmd_run(args: argparse.Namespace) -> int:
    net = _network(args)
    pattern = MovementPattern.parse(args.pattern)
    configs = [CoordinationConfig.from_number(c) for c in sorted(set(args.config or range(1, 7)))]
    results = []
    for trial in range(args.trials):
        seed = derive_seed(args.seed, 0, trial)
        fleet, schedule = build_scenario(net, args.cars, args.obstacles, pattern, seed, args.tick)
        descriptor = ScenarioDescriptor(args.cars, args.obstacles, pattern.value, seed, trial)
        for config in configs:
            results.append(run_scenario(net, fleet, schedule, config, descriptor, seed=seed))
    write_outputs(args.out, net, results)
    for r in results:
        print(f"trial {r.descriptor.trial} config {r.config_number}: "
              f"T={r.avg_travel_time:.2f} W={r.avg_wait_time:.2f} "
              f"R={r.avg_recalculations:.2f} success={r.success_rate:.4f}")
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_matrix(args: argparse.Namespace) -> int:
    net = _network(args)
    matrix = run_matrix(net, args.trials, args.base_seed, args.parallelism, args.out, args.tick)
    failed = sum(r.error is not None for r in matrix.results)
    print(f"{len(matrix.results)} result rows ({failed} failed); wrote {args.out}")
    print((args.out / "summary.txt").read_text(encoding="utf-8"), end="")
    return EXIT_OK


def _cmd_loops(args: argparse.Namespace) -> int:
    events = []
    with open(args.trace, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                events.append(Event.from_json(line))
            except (ValueError, KeyError, TypeError) as exc:
                raise SimulationError(f"{args.trace}:{lineno}: bad trace record ({exc})") from None
    found = detect_loops(visit_logs_from_trace(events), args.threshold)
    for d in found:
        print(json.dumps({"vehicle": d.vehicle, "node": d.node, "revisit_count": d.revisit_count,
                          "first_interval": list(d.first_interval)}))
    if not found:
        print(f"no node visited {args.threshold} or more times")
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "matrix": _cmd_matrix, "loops": _cmd_loops}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
