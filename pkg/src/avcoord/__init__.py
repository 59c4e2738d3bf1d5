"""Deterministic multi-vehicle routing simulator with obstacle memory.

Vehicles route over a directed road network, wait at blocked intersections,
optionally share obstacle sightings over instantaneous V2V broadcasts, and
optionally keep a persistent memory of blocked nodes (OMM) that every
replan avoids. Six coordination configurations can be compared on a seeded
factorial experiment matrix.
"""

from .agents import CLEARANCE_S, REROUTE_S, TIMEOUT_S, Vehicle, VehicleState, VehicleStats
from .comms import BroadcastRegistry, ObstacleMessage, broadcast
from .config import ALL_CONFIGS, ConfigLabel, CoordinationConfig
from .engine import Event, ObstacleSchedule, SimulationState, init_state, run_scenario, step
from .errors import (
    ComparisonError,
    GenerationError,
    MalformedInputError,
    NodeLookupError,
    ParameterError,
    SchemaError,
    SimulationError,
    ValidationError,
)
from .experiments import (
    ExperimentMatrix,
    MovementPattern,
    ScenarioSpec,
    build_scenario,
    derive_seed,
    generate_fleet,
    generate_obstacles,
    run_matrix,
)
from .metrics import (
    LoopDiagnostic,
    ScenarioDescriptor,
    ScenarioResult,
    aggregate,
    compare,
    detect_loops,
    percent_delta,
    summary_table,
)
from .network import (
    RoadNetwork,
    Route,
    dump_network,
    generate_network,
    load_network,
    shortest_path,
    shortest_path_excluding,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
