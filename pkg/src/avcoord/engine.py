"""Discrete-time simulation core.

Each :func:`step` covers the interval ``[clock, clock + tick]`` and runs, in
order: obstacle activation, vehicle movement (ascending vehicle id),
broadcast delivery, waiting-timer checks, and the clock advance. Movement
inside a tick is continuous, so arrival times carry sub-tick precision;
waiting timers are evaluated at the end of each tick.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from . import agents
from .agents import (
    EPS,
    Transit,
    Vehicle,
    VehicleState,
    clearance_check,
    make_fleet,
    on_message,
    on_obstacle_encounter,
    plan_initial_route,
    reactive_reroute_check,
)
from .comms import BroadcastRegistry, ObstacleMessage, broadcast
from .config import ALL_CONFIGS, ConfigLabel, CoordinationConfig
from .errors import ValidationError
from .network import NodeId, RoadNetwork

__all__ = [
    "ALL_CONFIGS",
    "ConfigLabel",
    "CoordinationConfig",
    "Event",
    "ObstacleSchedule",
    "SimulationState",
    "init_state",
    "run_scenario",
    "step",
]

EVENT_KINDS = ("arrival", "encounter", "broadcast", "reroute", "clearance", "timeout")


@dataclass(frozen=True)
class Event:
    t: float
    kind: str
    vehicle: int
    node: NodeId
    detail: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> str:
        record = {
            "t": round(self.t, 6),
            "kind": self.kind,
            "vehicle": self.vehicle,
            "node": self.node,
            "detail": self.detail,
        }
        return json.dumps(record, sort_keys=False, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "Event":
        d = json.loads(line)
        return cls(d["t"], d["kind"], d["vehicle"], d["node"], d.get("detail") or {})


def _is_multiple(value: float, tick: float) -> bool:
    k = round(value / tick)
    return k >= 1 and math.isclose(k * tick, value, rel_tol=0, abs_tol=1e-9)


@dataclass(frozen=True)
class ObstacleSchedule:
    entries: tuple[tuple[NodeId, float], ...] = ()
    clearance: float = agents.CLEARANCE_S
    reroute: float = agents.REROUTE_S
    timeout: float = agents.TIMEOUT_S
    tick: float = 0.1

    def __post_init__(self):
        object.__setattr__(
            self, "entries", tuple((int(n), float(t)) for n, t in self.entries)
        )
        if not (0 < self.tick <= 1):
            raise ValidationError(f"tick must be in (0, 1], got {self.tick}")
        for name in ("clearance", "reroute", "timeout"):
            if not _is_multiple(getattr(self, name), self.tick):
                raise ValidationError(f"{name} {getattr(self, name)} is not a multiple of tick {self.tick}")
        nodes = [n for n, _ in self.entries]
        if len(set(nodes)) != len(nodes):
            raise ValidationError("scheduled obstacle nodes must be distinct")
        if any(t < 0 for _, t in self.entries):
            raise ValidationError("obstacle appear_at must be non-negative")

    @property
    def nodes(self) -> tuple[NodeId, ...]:
        return tuple(n for n, _ in self.entries)

    @property
    def ticks(self) -> int:
        return round(self.timeout / self.tick)

    def validate(self, net: RoadNetwork, endpoints: Iterable[tuple[NodeId, NodeId]]) -> None:
        reserved: set[NodeId] = set()
        for s, d in endpoints:
            reserved.update((s, d))
        for node, _ in self.entries:
            if node not in net:
                raise ValidationError(f"obstacle node {node} is not in the network")
            if node in reserved:
                raise ValidationError(f"obstacle node {node} is a vehicle start or destination")


@dataclass
class SimulationState:
    network: RoadNetwork
    vehicles: list[Vehicle]
    schedule: ObstacleSchedule
    registry: BroadcastRegistry = field(default_factory=BroadcastRegistry)
    blocked: set[NodeId] = field(default_factory=set)
    rng_seed: int = 0
    tick_index: int = 0
    pending: list[tuple[NodeId, float]] = field(default_factory=list)

    @property
    def tick(self) -> float:
        return self.schedule.tick

    @property
    def clock(self) -> float:
        return self.tick_index * self.schedule.tick

    @property
    def done(self) -> bool:
        return self.tick_index >= self.schedule.ticks or not any(v.active for v in self.vehicles)


def init_state(
    net: RoadNetwork,
    fleet: Sequence[tuple[NodeId, NodeId]] | Sequence[Vehicle],
    schedule: ObstacleSchedule,
    config: CoordinationConfig,
    seed: int = 0,
) -> tuple[SimulationState, list[Event]]:
    """Build the initial state, plan every vehicle's first route and log spawns."""
    if not fleet:
        raise ValidationError("fleet must be nonempty")
    if isinstance(fleet[0], Vehicle):
        vehicles = list(fleet)
    else:
        vehicles = make_fleet(fleet)
    for v in vehicles:
        if v.start not in net or v.destination not in net:
            raise ValidationError(f"vehicle {v.id} endpoints not in network")
    schedule.validate(net, [(v.start, v.destination) for v in vehicles])
    pending = sorted(schedule.entries, key=lambda e: (e[1], e[0])) if config.obstacles_enabled else []
    state = SimulationState(net, vehicles, schedule, rng_seed=seed, pending=pending)
    events = []
    for v in vehicles:
        v.stats.visit_log.append((v.start, 0.0))
        route = plan_initial_route(v, net, config, schedule.timeout)
        detail = {
            "spawn": True,
            "start": v.start,
            "destination": v.destination,
            "route": list(route.nodes) if route else None,
        }
        events.append(Event(0.0, "arrival", v.id, v.start, detail))
        if route is None:
            events.append(Event(schedule.timeout, "timeout", v.id, v.start, {"reason": "no-path"}))
    return state, events


def _reroute_event(t: float, vehicle: Vehicle, replan: agents.Replan) -> Event:
    detail = {
        "trigger": replan.trigger,
        "ok": replan.ok,
        "origin": replan.origin,
        "excluded": list(replan.excluded),
        "route": list(replan.route.nodes) if replan.route else None,
    }
    if replan.trigger == "reactive":
        detail["backtrack_to"] = replan.backtrack_to
    return Event(t, "reroute", vehicle.id, replan.origin, detail)


def _blocked_for(state: SimulationState, vehicle: Vehicle, node: NodeId) -> bool:
    return node in state.blocked and node not in vehicle.passes


def _activate(state: SimulationState, config: CoordinationConfig, t0: float, events, outbox) -> None:
    while state.pending and state.pending[0][1] <= t0 + EPS:
        node, _ = state.pending.pop(0)
        state.blocked.add(node)
        for v in state.vehicles:
            if not v.active:
                continue
            if v.transit is not None and v.transit.to == node and node not in v.passes:
                # Halted before entering: back at the edge's start node.
                frm = v.transit.frm
                rest = v.route.nodes[v.route_index:]
                v.transit = None
                v.node = frm
                v.route = agents.Route((frm,) + rest, v.route.total_cost)
                v.route_index = 0
            elif v.transit is None and v.node == node and v.state is VehicleState.TRAVELING:
                _encounter(state, config, v, node, t0, events, outbox)


def _encounter(state, config, v: Vehicle, node: NodeId, t: float, events, outbox) -> None:
    msg = on_obstacle_encounter(v, node, t, config, state.registry.announced)
    events.append(Event(t, "encounter", v.id, node, {"at": v.node}))
    if msg is not None:
        outbox.append(msg)


def _move(state: SimulationState, config: CoordinationConfig, v: Vehicle, t0: float, events, outbox) -> None:
    net = state.network
    budget = state.tick
    t = t0
    while True:
        if v.transit is None:
            nxt = v.next_node()
            if nxt is None:
                return
            if _blocked_for(state, v, nxt):
                _encounter(state, config, v, nxt, t, events, outbox)
                return
            v.transit = Transit(v.node, nxt, net.weight(v.node, nxt))
            v.route_index += 1
        if budget <= EPS:
            return
        tr = v.transit
        need = tr.length - tr.elapsed
        if need > budget + EPS:
            tr.elapsed += budget
            return
        budget -= need
        t += need
        v.transit = None
        v.node = tr.to
        if tr.backtrack:
            v.trail.pop()
        else:
            v.trail.append(tr.to)
        v.stats.visit_log.append((tr.to, t))
        if tr.to == v.destination:
            v.state = VehicleState.ARRIVED
            v.stats.arrived = True
            v.stats.travel_time = t
            events.append(Event(t, "arrival", v.id, tr.to, {"final": True}))
            return
        events.append(Event(t, "arrival", v.id, tr.to, {"backtrack": tr.backtrack}))


def step(state: SimulationState, config: CoordinationConfig) -> list[Event]:
    """Advance the simulation by one tick and return the events it produced."""
    t0 = state.clock
    t1 = (state.tick_index + 1) * state.tick
    events: list[Event] = []
    outbox: list[ObstacleMessage] = []

    if config.obstacles_enabled:
        _activate(state, config, t0, events, outbox)

    for v in state.vehicles:
        if v.state is VehicleState.TRAVELING:
            _move(state, config, v, t0, events, outbox)

    for msg in outbox:
        if state.registry.is_announced(msg.node):
            continue
        events.append(
            Event(msg.timestamp, "broadcast", msg.sender, msg.node,
                  {"recipients": len(state.vehicles) - 1})
        )

        def deliver(vehicle: Vehicle, m: ObstacleMessage = msg) -> None:
            replan = on_message(vehicle, m, state.network, config, now=t1)
            if replan is not None:
                events.append(_reroute_event(t1, vehicle, replan))

        broadcast(state.registry, msg, state.vehicles, deliver)

    for v in state.vehicles:
        if v.state is not VehicleState.WAITING:
            continue
        if config.reactive_reroute:
            replan = reactive_reroute_check(
                v, state.network, t1, config, state.blocked, state.schedule.reroute
            )
            if replan is not None:
                events.append(_reroute_event(t1, v, replan))
                if replan.ok:
                    continue
        node = v.blocked_by
        if clearance_check(v, t1, state.schedule.clearance):
            still_waiting = any(
                o.state is VehicleState.WAITING and o.blocked_by == node for o in state.vehicles
            )
            if not still_waiting:
                state.blocked.discard(node)
            events.append(Event(t1, "clearance", v.id, node, {"global": not still_waiting}))

    state.tick_index += 1
    if state.tick_index >= state.schedule.ticks:
        for v in state.vehicles:
            if v.active:
                v.time_out(state.schedule.timeout)
                events.append(Event(state.schedule.timeout, "timeout", v.id, v.node, {}))
    return events


def run_scenario(
    net: RoadNetwork,
    fleet: Sequence[tuple[NodeId, NodeId]],
    schedule: ObstacleSchedule,
    config: CoordinationConfig,
    descriptor=None,
    seed: int = 0,
):
    """Simulate one scenario to completion and return its :class:`ScenarioResult`."""
    from .metrics import ScenarioDescriptor, build_result

    state, events = init_state(net, fleet, schedule, config, seed)
    while not state.done:
        events.extend(step(state, config))
    if descriptor is None:
        descriptor = ScenarioDescriptor(
            cars=len(state.vehicles),
            obstacles=len(schedule.entries),
            pattern="custom",
            seed=seed,
            trial=0,
        )
    return build_result(
        [v.stats for v in state.vehicles],
        config.label,
        descriptor,
        events,
        broadcasts=state.registry.broadcasts,
    )
