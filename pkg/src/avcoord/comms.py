"""Vehicle-to-vehicle obstacle broadcasts.

Delivery is instantaneous and lossless: a broadcast reaches every vehicle
except its sender within the tick it is sent. A scenario-wide registry makes
sure each blocked node is announced at most once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol

from .network import NodeId

VehicleId = int


@dataclass(frozen=True)
class ObstacleMessage:
    sender: VehicleId
    node: NodeId
    timestamp: float


@dataclass
class BroadcastRegistry:
    announced: set[NodeId] = field(default_factory=set)
    delivered_count: int = 0
    broadcasts: int = 0

    def is_announced(self, node: NodeId) -> bool:
        return node in self.announced


class _HasId(Protocol):
    id: VehicleId


def broadcast(
    registry: BroadcastRegistry,
    msg: ObstacleMessage,
    fleet: Iterable[_HasId],
    deliver: Callable[[_HasId, ObstacleMessage], None] | None = None,
) -> int:
    """Send ``msg`` to every vehicle in ``fleet`` but its sender.

    Returns the number of recipients, or 0 if the node was already announced
    (the duplicate is suppressed). ``deliver`` is invoked once per recipient
    in fleet order.
    """
    if msg.node in registry.announced:
        return 0
    registry.announced.add(msg.node)
    registry.broadcasts += 1
    recipients = 0
    for vehicle in fleet:
        if vehicle.id == msg.sender:
            continue
        if deliver is not None:
            deliver(vehicle, msg)
        recipients += 1
    registry.delivered_count += recipients
    return recipients
