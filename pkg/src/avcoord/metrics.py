"""Scenario metrics, percentage comparisons, loop diagnostics and CSV export."""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Mapping, Sequence

from .agents import VehicleStats
from .config import ConfigLabel
from .errors import ComparisonError, ParameterError

CSV_COLUMNS = ("Cars", "Obs", "Pattern", "Config", "Trial", "Seed", "T", "W", "R", "SuccessRate")
VEHICLE_CSV_COLUMNS = (
    "Cars", "Obs", "Pattern", "Config", "Trial", "Vehicle",
    "TravelTime", "WaitTime", "Recalculations", "Arrived",
)
PATTERN_ORDER = {"LR": 0, "Rand": 1}


@dataclass(frozen=True)
class ScenarioDescriptor:
    cars: int
    obstacles: int
    pattern: str
    seed: int
    trial: int


@dataclass
class ScenarioResult:
    per_vehicle: list[VehicleStats]
    avg_travel_time: float
    avg_wait_time: float
    avg_recalculations: float
    success_rate: float
    config_label: ConfigLabel
    descriptor: ScenarioDescriptor
    events: list = field(default_factory=list)
    broadcasts: int = 0
    error: str | None = None

    @property
    def config_number(self) -> int:
        return ConfigLabel(self.config_label).number

    def visit_logs(self) -> dict[int, list[tuple[int, float]]]:
        return {i: list(s.visit_log) for i, s in enumerate(self.per_vehicle)}


@dataclass(frozen=True)
class Aggregate:
    avg_travel_time: float
    avg_wait_time: float
    avg_recalculations: float
    success_rate: float


@dataclass(frozen=True)
class LoopDiagnostic:
    vehicle: int
    node: int
    revisit_count: int
    first_interval: tuple[float, float]


def aggregate(per_vehicle: Sequence[VehicleStats], fleet_size: int) -> Aggregate:
    """Fleet means; timed-out vehicles already carry the cutoff as travel time."""
    if fleet_size <= 0 or not per_vehicle:
        raise ParameterError("aggregate needs a nonempty fleet")
    if len(per_vehicle) != fleet_size:
        raise ParameterError(f"got {len(per_vehicle)} vehicle records for fleet size {fleet_size}")
    travel = wait = recalcs = 0.0
    arrived = 0
    for s in per_vehicle:
        travel += s.travel_time
        wait += s.wait_time
        recalcs += s.recalculations
        arrived += bool(s.arrived)
    n = fleet_size
    return Aggregate(travel / n, wait / n, recalcs / n, arrived / n)


def build_result(
    per_vehicle: Sequence[VehicleStats],
    config_label: ConfigLabel,
    descriptor: ScenarioDescriptor,
    events: list | None = None,
    broadcasts: int = 0,
) -> ScenarioResult:
    agg = aggregate(per_vehicle, len(per_vehicle))
    return ScenarioResult(
        per_vehicle=list(per_vehicle),
        avg_travel_time=agg.avg_travel_time,
        avg_wait_time=agg.avg_wait_time,
        avg_recalculations=agg.avg_recalculations,
        success_rate=agg.success_rate,
        config_label=ConfigLabel(config_label),
        descriptor=descriptor,
        events=list(events or []),
        broadcasts=broadcasts,
    )


def round_half_away(value: float, places: int = 1) -> float:
    q = Decimal(1).scaleb(-places)
    return float(Decimal(repr(value)).quantize(q, rounding=ROUND_HALF_UP))


def percent_delta(base: float, other: float) -> float | None:
    """``(other - base) / base`` in percent to one decimal; None on a zero base."""
    if base == 0:
        return None
    return round_half_away((other - base) / base * 100.0)


@dataclass(frozen=True)
class Comparison:
    travel: float | None
    wait: float | None
    recalculations: float | None


def compare(base: ScenarioResult, other: ScenarioResult) -> Comparison:
    """Percentage change of ``other`` relative to ``base`` on the three means."""
    if base.descriptor != other.descriptor:
        raise ComparisonError(f"descriptors differ: {base.descriptor} vs {other.descriptor}")
    return compare_means(
        (base.avg_travel_time, base.avg_wait_time, base.avg_recalculations),
        (other.avg_travel_time, other.avg_wait_time, other.avg_recalculations),
    )


def compare_means(base: Sequence[float], other: Sequence[float]) -> Comparison:
    return Comparison(*(percent_delta(b, o) for b, o in zip(base, other)))


def detect_loops(
    visit_logs: Mapping[int, Sequence] | Sequence[Sequence], threshold: int = 2
) -> list[LoopDiagnostic]:
    """Report every (vehicle, node) visited at least ``threshold`` times.

    Log entries are ``(node, time)`` pairs or bare node ids. Output is sorted
    by revisit count (descending), then vehicle id, then node id. The
    interval runs from the first visit to the second (a single visit gives
    a zero-length interval).
    """
    if threshold < 1:
        raise ParameterError(f"threshold must be >= 1, got {threshold}")
    if not isinstance(visit_logs, Mapping):
        visit_logs = dict(enumerate(visit_logs))
    found = []
    for vehicle, log in visit_logs.items():
        entries = [(e, float(i)) if not isinstance(e, (tuple, list)) else (e[0], float(e[1]))
                   for i, e in enumerate(log)]
        counts = Counter(node for node, _ in entries)
        for node, count in counts.items():
            if count < threshold:
                continue
            times = [t for n, t in entries if n == node]
            found.append(LoopDiagnostic(vehicle, node, count, (times[0], times[min(1, count - 1)])))
    found.sort(key=lambda d: (-d.revisit_count, d.vehicle, d.node))
    return found


def visit_logs_from_trace(events: Iterable) -> dict[int, list[tuple[int, float]]]:
    """Rebuild per-vehicle visit logs from arrival events."""
    logs: dict[int, list[tuple[int, float]]] = {}
    for e in events:
        if e.kind == "arrival":
            logs.setdefault(e.vehicle, []).append((e.node, e.t))
    return dict(sorted(logs.items()))


# -- export ---------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def sort_key(result: ScenarioResult):
    d = result.descriptor
    return (d.cars, d.obstacles, PATTERN_ORDER.get(d.pattern, 99), d.pattern,
            result.config_number, d.trial)


def metrics_csv(results: Iterable[ScenarioResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in sorted(results, key=sort_key):
        d = r.descriptor
        row = [d.cars, d.obstacles, d.pattern, r.config_number, d.trial, d.seed]
        if r.error is not None:
            row += ["", "", "", ""]
        else:
            row += [_fmt(r.avg_travel_time), _fmt(r.avg_wait_time),
                    _fmt(r.avg_recalculations), _fmt(r.success_rate)]
        writer.writerow(row)
    return buf.getvalue()


def vehicles_csv(results: Iterable[ScenarioResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(VEHICLE_CSV_COLUMNS)
    for r in sorted(results, key=sort_key):
        if r.error is not None:
            continue
        d = r.descriptor
        for i, s in enumerate(r.per_vehicle):
            writer.writerow([d.cars, d.obstacles, d.pattern, r.config_number, d.trial, i,
                             _fmt(s.travel_time), _fmt(s.wait_time), s.recalculations,
                             int(s.arrived)])
    return buf.getvalue()


SUMMARY_ROWS = (
    (1, "No Obstacle"),
    (2, "Obstacle, No Reroute"),
    (3, "Communication Only"),
    (5, "OMM Only"),
    (4, "Reroute w/o OMM"),
    (6, "Reroute + OMM"),
)
SUMMARY_COMPARISONS = ((4, 2), (6, 2), (6, 4))


def summary_means(results: Iterable[ScenarioResult]) -> dict[int, tuple[float, float, float]]:
    """Per-configuration means over every successful scenario row."""
    buckets: dict[int, list[ScenarioResult]] = {}
    for r in results:
        if r.error is None:
            buckets.setdefault(r.config_number, []).append(r)
    out = {}
    for cfg, rows in sorted(buckets.items()):
        rows.sort(key=sort_key)
        n = len(rows)
        out[cfg] = (
            sum(r.avg_travel_time for r in rows) / n,
            sum(r.avg_wait_time for r in rows) / n,
            sum(r.avg_recalculations for r in rows) / n,
        )
    return out


def summary_table(results: Iterable[ScenarioResult]) -> str:
    means = summary_means(results)
    header = ("Configuration", "Avg. Travel (s)", "Avg. Wait (s)", "Avg. Recalc.")
    rows = []
    for cfg, name in SUMMARY_ROWS:
        if cfg in means:
            t, w, r = means[cfg]
            rows.append((f"{cfg}. {name}", f"{t:.2f}", f"{w:.2f}", f"{r:.2f}"))
    comparisons = []
    for a, b in SUMMARY_COMPARISONS:
        if a in means and b in means:
            c = compare_means(means[b], means[a])
            # Recalculation deltas against memory-less configurations only.
            cells = [c.travel, c.wait, c.recalculations if b == 4 else None]
            comparisons.append((f"Config {a} vs. Config {b}",
                                *("-" if x is None else f"{x:+.1f}%" for x in cells)))
    widths = [max(len(str(row[i])) for row in [header, *rows, *comparisons]) for i in range(4)]

    def line(row):
        return "  ".join(str(c).ljust(widths[0]) if i == 0 else str(c).rjust(widths[i])
                         for i, c in enumerate(row)).rstrip()

    out = [line(header), "-" * (sum(widths) + 6)]
    out += [line(r) for r in rows]
    if comparisons:
        out.append("-" * (sum(widths) + 6))
        out.append("Comparative metrics:")
        out += [line(r) for r in comparisons]
    return "\n".join(out) + "\n"
