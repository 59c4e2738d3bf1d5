"""Scenario generation and the factorial experiment matrix."""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

from .config import CoordinationConfig
from .engine import ObstacleSchedule, run_scenario
from .errors import GenerationError, ParameterError, SimulationError, ValidationError
from .metrics import (
    ScenarioDescriptor,
    ScenarioResult,
    metrics_csv,
    sort_key,
    summary_table,
    vehicles_csv,
)
from .network import NodeId, RoadNetwork, dump_network, shortest_path

CAR_LEVELS = (15, 35, 55)
OBSTACLE_LEVELS = (6, 20)
PAIR_RETRIES = 1000
SCENARIO_RETRIES = 50


class MovementPattern(str, Enum):
    LEFT_TO_RIGHT = "LR"
    RANDOM = "Rand"

    @classmethod
    def parse(cls, text: str) -> "MovementPattern":
        aliases = {"lr": cls.LEFT_TO_RIGHT, "left-right": cls.LEFT_TO_RIGHT,
                   "rand": cls.RANDOM, "random": cls.RANDOM}
        try:
            return aliases[text.lower()]
        except KeyError:
            raise ParameterError(f"unknown movement pattern {text!r}") from None


PATTERNS = (MovementPattern.LEFT_TO_RIGHT, MovementPattern.RANDOM)


def derive_seed(*parts: int | str) -> int:
    """Stable 64-bit seed from the given parts (platform and process independent)."""
    text = ":".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "big")


@dataclass(frozen=True)
class ScenarioSpec:
    car_count: int
    obstacle_count: int
    pattern: MovementPattern
    config: CoordinationConfig
    trials: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.car_count <= 0:
            raise ParameterError("car_count must be positive")
        if self.obstacle_count < 0:
            raise ParameterError("obstacle_count must be non-negative")
        if self.trials < 1:
            raise ParameterError("trials must be >= 1")


@dataclass
class ExperimentMatrix:
    specs: list[ScenarioSpec] = field(default_factory=list)
    results: list[ScenarioResult] = field(default_factory=list)


def generate_fleet(
    net: RoadNetwork, car_count: int, pattern: MovementPattern | str, seed: int
) -> list[tuple[NodeId, NodeId]]:
    """Seeded (start, destination) pairs for ``car_count`` vehicles.

    Left-to-right draws starts from the leftmost quarter of nodes by x and
    destinations from the rightmost quarter; random draws both uniformly
    over all nodes. Every pair has a path.
    """
    if car_count <= 0:
        raise ParameterError(f"car_count must be positive, got {car_count}")
    pattern = MovementPattern(pattern) if not isinstance(pattern, MovementPattern) else pattern
    rng = random.Random(derive_seed("fleet", seed))
    if pattern is MovementPattern.LEFT_TO_RIGHT:
        starts, ends = net.left_quartile(), net.right_quartile()
    else:
        starts = ends = list(net.nodes)
    reach: dict[NodeId, set[NodeId]] = {}
    fleet = []
    for _ in range(car_count):
        for _ in range(PAIR_RETRIES):
            s, d = rng.choice(starts), rng.choice(ends)
            if s == d:
                continue
            if s not in reach:
                reach[s] = net.reachable_from(s)
            if d in reach[s]:
                fleet.append((s, d))
                break
        else:
            raise GenerationError("no feasible origin-destination pair", seed)
    return fleet


def generate_obstacles(
    net: RoadNetwork,
    fleet: Sequence[tuple[NodeId, NodeId]],
    obstacle_count: int,
    seed: int,
) -> ObstacleSchedule:
    """Seeded obstacle placement away from every start and destination.

    At least half of the obstacles (when enough such nodes exist) sit on
    some vehicle's initial shortest path; the rest are uniform over the
    remaining candidates. All obstacles appear at t = 0.
    """
    if obstacle_count < 0:
        raise ParameterError("obstacle_count must be non-negative")
    if obstacle_count == 0:
        return ObstacleSchedule(())
    endpoints = {n for pair in fleet for n in pair}
    candidates = sorted(set(net.nodes) - endpoints)
    if len(candidates) < obstacle_count:
        raise ValidationError(
            f"only {len(candidates)} non-endpoint nodes for {obstacle_count} obstacles"
        )
    on_path: set[NodeId] = set()
    for s, d in fleet:
        route = shortest_path(net, s, d)
        if route is not None:
            on_path.update(route.nodes[1:-1])
    on_path &= set(candidates)
    rng = random.Random(derive_seed("obstacles", seed))
    k_on = min(len(on_path), math.ceil(obstacle_count / 2))
    picked = rng.sample(sorted(on_path), k_on)
    rest = sorted(set(candidates) - set(picked))
    picked += rng.sample(rest, obstacle_count - k_on)
    return ObstacleSchedule(tuple((n, 0.0) for n in picked))


def build_scenario(
    net: RoadNetwork,
    car_count: int,
    obstacle_count: int,
    pattern: MovementPattern | str,
    seed: int,
    tick: float = 0.1,
) -> tuple[list[tuple[NodeId, NodeId]], ObstacleSchedule]:
    """Fleet plus a valid obstacle schedule, retrying with derived sub-seeds."""
    last: Exception | None = None
    for attempt in range(SCENARIO_RETRIES):
        sub = seed if attempt == 0 else derive_seed("retry", seed, attempt)
        fleet = generate_fleet(net, car_count, pattern, sub)
        try:
            schedule = generate_obstacles(net, fleet, obstacle_count, sub)
        except ValidationError as exc:
            last = exc
            continue
        if tick != schedule.tick:
            schedule = ObstacleSchedule(schedule.entries, tick=tick)
        return fleet, schedule
    raise GenerationError(f"no valid scenario after {SCENARIO_RETRIES} attempts: {last}", seed)


# -- matrix -----------------------------------------------------------------


@dataclass(frozen=True)
class _Job:
    cell: int
    cars: int
    obstacles: int
    pattern: MovementPattern
    trial: int
    seed: int
    config_number: int
    tick: float


_worker_net: RoadNetwork | None = None


def _init_worker(net: RoadNetwork) -> None:
    global _worker_net
    _worker_net = net


def _run_job(job: _Job, net: RoadNetwork | None = None) -> ScenarioResult:
    net = net if net is not None else _worker_net
    config = CoordinationConfig.from_number(job.config_number)
    descriptor = ScenarioDescriptor(job.cars, job.obstacles, job.pattern.value, job.seed, job.trial)
    try:
        fleet, schedule = build_scenario(net, job.cars, job.obstacles, job.pattern, job.seed, job.tick)
        return run_scenario(net, fleet, schedule, config, descriptor, seed=job.seed)
    except SimulationError as exc:
        return ScenarioResult([], 0.0, 0.0, 0.0, 0.0, config.label, descriptor, error=str(exc))


def matrix_jobs(
    trials: int,
    base_seed: int,
    cars_levels: Sequence[int] = CAR_LEVELS,
    obstacle_levels: Sequence[int] = OBSTACLE_LEVELS,
    patterns: Sequence[MovementPattern] = PATTERNS,
    configs: Sequence[int] = (1, 2, 3, 4, 5, 6),
    tick: float = 0.1,
) -> list[_Job]:
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    jobs = []
    cells = itertools.product(cars_levels, obstacle_levels, patterns)
    for cell, (cars, obs, pattern) in enumerate(cells):
        for trial in range(trials):
            seed = derive_seed(base_seed, cell, trial)
            for cfg in configs:
                jobs.append(_Job(cell, cars, obs, pattern, trial, seed, cfg, tick))
    return jobs


def run_jobs(net: RoadNetwork, jobs: Sequence[_Job], parallelism: int = 1) -> list[ScenarioResult]:
    if parallelism < 1:
        raise ParameterError("parallelism must be >= 1")
    if parallelism == 1:
        results = [_run_job(job, net) for job in jobs]
    else:
        with ProcessPoolExecutor(parallelism, initializer=_init_worker, initargs=(net,)) as pool:
            results = list(pool.map(_run_job, jobs, chunksize=max(1, len(jobs) // (4 * parallelism))))
    return sorted(results, key=sort_key)


def run_matrix(
    net: RoadNetwork,
    trials: int = 3,
    base_seed: int = 0,
    parallelism: int = 1,
    out_dir: str | Path | None = None,
    tick: float = 0.1,
    **levels,
) -> ExperimentMatrix:
    """Run every density x obstacles x pattern x configuration cell ``trials`` times.

    Within a cell and trial all six configurations share the same fleet and
    obstacle schedule. Output is sorted before export, so it does not
    depend on ``parallelism``.
    """
    jobs = matrix_jobs(trials, base_seed, tick=tick, **levels)
    results = run_jobs(net, jobs, parallelism)
    specs = [
        ScenarioSpec(j.cars, j.obstacles, j.pattern, CoordinationConfig.from_number(j.config_number),
                     trials, j.seed)
        for j in jobs if j.trial == 0
    ]
    matrix = ExperimentMatrix(specs, results)
    if out_dir is not None:
        write_outputs(Path(out_dir), net, results)
    return matrix


def trace_name(result: ScenarioResult) -> str:
    d = result.descriptor
    return f"c{d.cars}_o{d.obstacles}_{d.pattern}_cfg{result.config_number}_t{d.trial}.jsonl"


def write_outputs(out: Path, net: RoadNetwork, results: Sequence[ScenarioResult]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    traces = out / "traces"
    traces.mkdir(exist_ok=True)
    (out / "metrics.csv").write_text(metrics_csv(results), encoding="utf-8")
    (out / "vehicles.csv").write_text(vehicles_csv(results), encoding="utf-8")
    (out / "summary.txt").write_text(summary_table(results), encoding="utf-8")
    (out / "network.graphml").write_bytes(dump_network(net))
    failures = []
    for r in sorted(results, key=sort_key):
        if r.error is not None:
            failures.append({"descriptor": r.descriptor.__dict__, "config": r.config_number,
                             "error": r.error})
            continue
        with open(traces / trace_name(r), "w", encoding="utf-8") as fh:
            for e in r.events:
                fh.write(e.to_json())
                fh.write("\n")
    if failures:
        with open(out / "failures.jsonl", "w", encoding="utf-8") as fh:
            for f in failures:
                fh.write(json.dumps(f) + "\n")
