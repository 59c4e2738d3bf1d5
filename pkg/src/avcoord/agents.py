"""Vehicle agents: state machine, obstacle memory and replanning rules.

A vehicle stands at a node or is in transit along an edge. When the next
node on its route is blocked it waits where it stands. What happens next
depends on the coordination configuration:

* after ``CLEARANCE_S`` of waiting it is allowed through the blocked node;
* with reactive rerouting, after ``REROUTE_S`` it backs up to the node it
  came from and plans again;
* with communication, obstacle announcements on its remaining route make
  it plan again straight away.

With OMM every replan excludes the vehicle's whole memory of blocked nodes.
Without it, a replan excludes only the one node that prompted it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Container, Iterable

from .comms import ObstacleMessage, VehicleId
from .config import CoordinationConfig
from .errors import ValidationError
from .network import NodeId, RoadNetwork, Route, shortest_path, shortest_path_excluding

REROUTE_S = 8.0
CLEARANCE_S = 10.0
TIMEOUT_S = 300.0
EPS = 1e-9


class VehicleState(str, Enum):
    TRAVELING = "Traveling"
    WAITING = "WaitingAtObstacle"
    ARRIVED = "Arrived"
    TIMED_OUT = "TimedOut"


@dataclass
class VehicleStats:
    travel_time: float = 0.0
    wait_time: float = 0.0
    recalculations: int = 0
    arrived: bool = False
    visit_log: list[tuple[NodeId, float]] = field(default_factory=list)


@dataclass
class Transit:
    frm: NodeId
    to: NodeId
    length: float
    elapsed: float = 0.0
    backtrack: bool = False


@dataclass
class Replan:
    """Outcome of one path computation after the initial plan."""

    trigger: str  # "message" or "reactive"
    origin: NodeId
    excluded: tuple[NodeId, ...]
    route: Route | None
    backtrack_to: NodeId | None = None

    @property
    def ok(self) -> bool:
        return self.route is not None


@dataclass
class Vehicle:
    id: VehicleId
    start: NodeId
    destination: NodeId
    node: NodeId = -1
    transit: Transit | None = None
    route: Route | None = None
    route_index: int = 0
    memory: set[NodeId] = field(default_factory=set)
    passes: set[NodeId] = field(default_factory=set)
    wait_started_at: float | None = None
    blocked_by: NodeId | None = None
    reroute_attempted: bool = False
    state: VehicleState = VehicleState.TRAVELING
    stats: VehicleStats = field(default_factory=VehicleStats)
    trail: list[NodeId] = field(default_factory=list)

    def __post_init__(self):
        if self.start == self.destination:
            raise ValidationError(f"vehicle {self.id}: start equals destination ({self.start})")
        if self.node == -1:
            self.node = self.start
        if not self.trail:
            self.trail.append(self.start)

    @property
    def active(self) -> bool:
        return self.state in (VehicleState.TRAVELING, VehicleState.WAITING)

    @property
    def anchor(self) -> NodeId:
        """Node the vehicle is at, or the node it is heading into."""
        return self.transit.to if self.transit is not None else self.node

    def remaining_route(self) -> tuple[NodeId, ...]:
        """Nodes the vehicle has yet to enter, in order."""
        if self.route is None:
            return ()
        rest = self.route.nodes[self.route_index + 1:]
        if self.transit is not None:
            return (self.transit.to,) + rest
        return rest

    def next_node(self) -> NodeId | None:
        if self.route is None or self.transit is not None:
            return None
        i = self.route_index + 1
        return self.route.nodes[i] if i < len(self.route.nodes) else None

    def previous_node(self) -> NodeId | None:
        return self.trail[-2] if len(self.trail) >= 2 else None

    def remember(self, node: NodeId) -> None:
        if node != self.start and node != self.destination:
            self.memory.add(node)

    def set_route(self, route: Route) -> None:
        self.route = route
        self.route_index = 0

    def end_wait(self, now: float) -> None:
        self.stats.wait_time += now - self.wait_started_at
        self.wait_started_at = None
        self.blocked_by = None
        self.reroute_attempted = False
        self.state = VehicleState.TRAVELING

    def time_out(self, timeout: float = TIMEOUT_S) -> None:
        if self.state is VehicleState.WAITING:
            self.stats.wait_time += timeout - self.wait_started_at
            self.wait_started_at = None
            self.blocked_by = None
        self.state = VehicleState.TIMED_OUT
        self.stats.travel_time = timeout
        self.stats.arrived = False


def _exclusion(vehicle: Vehicle, config: CoordinationConfig, prompt: NodeId) -> tuple[NodeId, ...]:
    if config.omm:
        return tuple(sorted(vehicle.memory))
    return (prompt,)


def plan_initial_route(
    vehicle: Vehicle, net: RoadNetwork, config: CoordinationConfig, timeout: float = TIMEOUT_S
) -> Route | None:
    """Plan from the start node; an infeasible plan times the vehicle out at once."""
    if config.omm:
        route = shortest_path_excluding(net, vehicle.start, vehicle.destination, vehicle.memory)
    else:
        route = shortest_path(net, vehicle.start, vehicle.destination)
    if route is None:
        vehicle.time_out(timeout)
        return None
    vehicle.set_route(route)
    return route


def on_obstacle_encounter(
    vehicle: Vehicle,
    node: NodeId,
    now: float,
    config: CoordinationConfig,
    announced: Container[NodeId] = frozenset(),
) -> ObstacleMessage | None:
    if vehicle.state is not VehicleState.TRAVELING:
        return None
    vehicle.state = VehicleState.WAITING
    vehicle.wait_started_at = now
    vehicle.blocked_by = node
    vehicle.reroute_attempted = False
    if config.omm:
        vehicle.remember(node)
    if config.communication and node not in announced:
        return ObstacleMessage(vehicle.id, node, now)
    return None


def on_message(
    vehicle: Vehicle,
    msg: ObstacleMessage,
    net: RoadNetwork,
    config: CoordinationConfig,
    now: float | None = None,
) -> Replan | None:
    """Absorb an obstacle announcement; replan if it sits on the remaining route.

    Returns the :class:`Replan` performed, or None when the route is left as is.
    """
    if not config.communication or not vehicle.active:
        return None
    if config.omm:
        vehicle.remember(msg.node)
    if msg.node == vehicle.destination or msg.node == vehicle.blocked_by:
        return None
    if vehicle.transit is None and msg.node == vehicle.node:
        return None
    if msg.node not in vehicle.remaining_route():
        return None

    origin = vehicle.anchor
    excluded = _exclusion(vehicle, config, msg.node)
    route = shortest_path_excluding(net, origin, vehicle.destination, excluded)
    vehicle.stats.recalculations += 1
    replan = Replan("message", origin, excluded, route)
    if route is None:
        return replan
    vehicle.set_route(route)
    if vehicle.state is VehicleState.WAITING and vehicle.next_node() != vehicle.blocked_by:
        vehicle.end_wait(msg.timestamp if now is None else now)
    return replan


def reactive_reroute_check(
    vehicle: Vehicle,
    net: RoadNetwork,
    now: float,
    config: CoordinationConfig,
    blocked: Container[NodeId] = frozenset(),
    threshold: float = REROUTE_S,
) -> Replan | None:
    """Back up one node and replan once the wait reaches ``threshold``.

    Fires at most once per wait. If no route exists the vehicle keeps
    waiting for clearance.
    """
    if not config.reactive_reroute or vehicle.state is not VehicleState.WAITING:
        return None
    if vehicle.reroute_attempted or now - vehicle.wait_started_at < threshold - EPS:
        return None
    obstacle = vehicle.blocked_by
    if obstacle not in blocked or obstacle in vehicle.passes:
        return None
    vehicle.reroute_attempted = True

    prev = vehicle.previous_node()
    origin = prev if prev is not None else vehicle.node
    excluded = _exclusion(vehicle, config, obstacle)
    route = shortest_path_excluding(net, origin, vehicle.destination, excluded)
    vehicle.stats.recalculations += 1
    replan = Replan("reactive", origin, excluded, route, backtrack_to=prev)
    if route is None:
        return replan
    here = vehicle.node
    vehicle.end_wait(now)
    vehicle.set_route(route)
    if prev is not None:
        length = net.weight(prev, here) if net.has_edge(prev, here) else net.weight(here, prev)
        vehicle.transit = Transit(here, prev, length, backtrack=True)
    return replan


def clearance_check(vehicle: Vehicle, now: float, threshold: float = CLEARANCE_S) -> bool:
    """Let the vehicle through its blocked node after ``threshold`` seconds of waiting."""
    if vehicle.state is not VehicleState.WAITING:
        return False
    if now - vehicle.wait_started_at < threshold - EPS:
        return False
    vehicle.passes.add(vehicle.blocked_by)
    vehicle.end_wait(now)
    return True


def make_fleet(pairs: Iterable[tuple[NodeId, NodeId]]) -> list[Vehicle]:
    return [Vehicle(i, s, d) for i, (s, d) in enumerate(pairs)]
