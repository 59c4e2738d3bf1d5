"""Road network model, GraphML I/O, seeded generation and shortest paths.

Nodes are intersections with planar positions; directed edges carry a
strictly positive travel time in seconds. Routing is Dijkstra over the
directed graph with a deterministic tie-break: among equal-cost paths the
lexicographically smallest node-id sequence wins.
"""

from __future__ import annotations

import heapq
import io
import math
import random
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Mapping
from xml.parsers import expat

from .errors import (
    GenerationError,
    MalformedInputError,
    NodeLookupError,
    ParameterError,
    SchemaError,
    ValidationError,
)

NodeId = int

GRAPHML_NS = "http://graphml.graphdrawing.org/xmlns"

# Generator geometry: unit grid spacing, +-JITTER per axis.
JITTER = 0.3
SECONDS_PER_UNIT = 1.7
NEIGHBOURS = 4
GENERATION_RETRIES = 25


@dataclass(frozen=True)
class Route:
    nodes: tuple[NodeId, ...]
    total_cost: float

    @property
    def source(self) -> NodeId:
        return self.nodes[0]

    @property
    def destination(self) -> NodeId:
        return self.nodes[-1]

    def __len__(self) -> int:
        return len(self.nodes)


class RoadNetwork:
    """Immutable directed weighted graph with node positions."""

    __slots__ = ("_positions", "_weights", "_adjacency")

    def __init__(
        self,
        positions: Mapping[NodeId, tuple[float, float]],
        edges: Mapping[tuple[NodeId, NodeId], float],
    ):
        pos: dict[NodeId, tuple[float, float]] = {}
        for node, (x, y) in sorted(positions.items()):
            if not isinstance(node, int) or isinstance(node, bool) or node < 0:
                raise ValidationError(f"node id must be a non-negative integer, got {node!r}")
            pos[node] = (float(x), float(y))
        weights: dict[tuple[NodeId, NodeId], float] = {}
        adjacency: dict[NodeId, list[tuple[NodeId, float]]] = {n: [] for n in pos}
        for (u, v), w in sorted(edges.items()):
            if u not in pos or v not in pos:
                missing = u if u not in pos else v
                raise SchemaError(f"edge {u}->{v} references undeclared node {missing}")
            if u == v:
                raise ValidationError(f"self-loop on node {u}")
            w = float(w)
            if not (w > 0.0) or math.isinf(w):
                raise ValidationError(f"edge {u}->{v} has non-positive weight {w}")
            weights[(u, v)] = w
            adjacency[u].append((v, w))
        self._positions = pos
        self._weights = weights
        self._adjacency = {n: tuple(adj) for n, adj in adjacency.items()}

    # -- queries ---------------------------------------------------------

    @property
    def node_count(self) -> int:
        return len(self._positions)

    @property
    def edge_count(self) -> int:
        return len(self._weights)

    @property
    def nodes(self) -> tuple[NodeId, ...]:
        return tuple(self._positions)

    @property
    def edges(self) -> dict[tuple[NodeId, NodeId], float]:
        return dict(self._weights)

    def position(self, node: NodeId) -> tuple[float, float]:
        self._require(node)
        return self._positions[node]

    def successors(self, node: NodeId) -> tuple[tuple[NodeId, float], ...]:
        self._require(node)
        return self._adjacency[node]

    def weight(self, u: NodeId, v: NodeId) -> float:
        try:
            return self._weights[(u, v)]
        except KeyError:
            raise NodeLookupError(f"no edge {u}->{v}") from None

    def has_edge(self, u: NodeId, v: NodeId) -> bool:
        return (u, v) in self._weights

    def __contains__(self, node: object) -> bool:
        return node in self._positions

    def _require(self, node: NodeId) -> None:
        if node not in self._positions:
            raise NodeLookupError(f"unknown node {node!r}")

    def route_cost(self, nodes: Iterable[NodeId]) -> float:
        """Sum of edge weights along ``nodes``, accumulated left to right."""
        nodes = list(nodes)
        cost = 0.0
        for u, v in zip(nodes, nodes[1:]):
            cost += self.weight(u, v)
        return cost

    def left_quartile(self) -> list[NodeId]:
        ordered = sorted(self._positions, key=lambda n: (self._positions[n][0], n))
        return sorted(ordered[: _quartile_size(len(ordered))])

    def right_quartile(self) -> list[NodeId]:
        ordered = sorted(self._positions, key=lambda n: (self._positions[n][0], n))
        return sorted(ordered[len(ordered) - _quartile_size(len(ordered)):])

    def reachable_from(self, source: NodeId, banned: Iterable[NodeId] = ()) -> set[NodeId]:
        self._require(source)
        banned = set(banned) - {source}
        seen = {source}
        stack = [source]
        while stack:
            u = stack.pop()
            for v, _ in self._adjacency[u]:
                if v not in seen and v not in banned:
                    seen.add(v)
                    stack.append(v)
        return seen

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RoadNetwork):
            return NotImplemented
        return self._positions == other._positions and self._weights == other._weights

    def __hash__(self) -> int:
        return hash((tuple(self._positions.items()), tuple(self._weights.items())))

    def __repr__(self) -> str:
        return f"RoadNetwork(nodes={self.node_count}, edges={self.edge_count})"

    def __getstate__(self):
        return (self._positions, self._weights)

    def __setstate__(self, state):
        positions, weights = state
        self.__init__(positions, weights)


def _quartile_size(n: int) -> int:
    return max(1, math.ceil(n / 4))


# -- shortest paths ------------------------------------------------------


def _dijkstra(
    net: RoadNetwork, source: NodeId, target: NodeId, banned: frozenset[NodeId] | set[NodeId]
) -> Route | None:
    # Labels are (cost, path); tuple order gives the lexicographic tie-break.
    adjacency = net._adjacency
    start = (0.0, (source,))
    best: dict[NodeId, tuple[float, tuple[NodeId, ...]]] = {source: start}
    heap = [start]
    settled: set[NodeId] = set()
    while heap:
        cost, path = heapq.heappop(heap)
        u = path[-1]
        if u in settled:
            continue
        settled.add(u)
        if u == target:
            return Route(path, cost)
        for v, w in adjacency[u]:
            if v in settled or v in banned:
                continue
            label = (cost + w, path + (v,))
            current = best.get(v)
            if current is None or label < current:
                best[v] = label
                heapq.heappush(heap, label)
    return None


def shortest_path(net: RoadNetwork, source: NodeId, target: NodeId) -> Route | None:
    """Minimum-cost route from ``source`` to ``target``, or None if unreachable."""
    net._require(source)
    net._require(target)
    return _dijkstra(net, source, target, frozenset())


def shortest_path_excluding(
    net: RoadNetwork, source: NodeId, target: NodeId, obstacles: Iterable[NodeId]
) -> Route | None:
    """Shortest route that never passes through a node in ``obstacles``.

    The source and destination are never excluded, and ids that are not in
    the network are ignored.
    """
    net._require(source)
    net._require(target)
    banned = {v for v in obstacles if v in net} - {source, target}
    return _dijkstra(net, source, target, banned)


# -- GraphML ------------------------------------------------------------


class _GraphMLHandler:
    def __init__(self, parser):
        self.parser = parser
        self.keys: dict[str, str] = {}
        self.nodes: list[tuple[int, dict[str, str]]] = []
        self.edges: list[tuple[int, dict[str, str]]] = []
        self._current: dict[str, str] | None = None
        self._data_key: str | None = None
        self._text: list[str] = []

    @staticmethod
    def _local(name: str) -> str:
        return name.rsplit(" ", 1)[-1]

    def start(self, name, attrs):
        tag = self._local(name)
        attrs = {self._local(k): v for k, v in attrs.items()}
        line = self.parser.CurrentLineNumber
        if tag == "key" and "id" in attrs:
            self.keys[attrs["id"]] = attrs.get("attr.name", attrs["id"])
        elif tag == "node":
            self._current = dict(attrs)
            self.nodes.append((line, self._current))
        elif tag == "edge":
            self._current = dict(attrs)
            self.edges.append((line, self._current))
        elif tag == "data" and self._current is not None:
            self._data_key = attrs.get("key")
            self._text = []

    def end(self, name):
        tag = self._local(name)
        if tag == "data" and self._current is not None and self._data_key is not None:
            field = self.keys.get(self._data_key, self._data_key)
            self._current.setdefault(field, "".join(self._text).strip())
            self._data_key = None
        elif tag in ("node", "edge"):
            self._current = None

    def chars(self, text):
        if self._data_key is not None:
            self._text.append(text)


def _parse_int(value: str | None, what: str, line: int) -> int:
    if value is None:
        raise SchemaError(f"line {line}: {what} is missing")
    try:
        out = int(value)
    except ValueError:
        raise SchemaError(f"line {line}: {what} must be an integer, got {value!r}") from None
    if out < 0:
        raise SchemaError(f"line {line}: {what} must be non-negative, got {out}")
    return out


def _parse_float(value: str | None, what: str, line: int) -> float:
    if value is None:
        raise SchemaError(f"line {line}: {what} is missing")
    try:
        out = float(value)
    except ValueError:
        raise SchemaError(f"line {line}: {what} must be numeric, got {value!r}") from None
    if math.isnan(out):
        raise SchemaError(f"line {line}: {what} is NaN")
    return out


def load_network(source: BinaryIO | bytes | str) -> RoadNetwork:
    """Parse a GraphML-style document into a :class:`RoadNetwork`.

    ``node`` elements need ``id``, ``x`` and ``y``; ``edge`` elements need
    ``source``, ``target`` and ``weight``. Values may be given as element
    attributes or as standard GraphML ``<data>`` children.
    """
    if isinstance(source, str):
        source = source.encode("utf-8")
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    parser = expat.ParserCreate(namespace_separator=" ")
    handler = _GraphMLHandler(parser)
    parser.StartElementHandler = handler.start
    parser.EndElementHandler = handler.end
    parser.CharacterDataHandler = handler.chars
    try:
        parser.ParseFile(source)
    except expat.ExpatError as exc:
        raise MalformedInputError(
            f"malformed XML at line {exc.lineno}, column {exc.offset}: {expat.ErrorString(exc.code)}"
        ) from None

    positions: dict[NodeId, tuple[float, float]] = {}
    for line, attrs in handler.nodes:
        node = _parse_int(attrs.get("id"), "node id", line)
        if node in positions:
            raise SchemaError(f"line {line}: duplicate node id {node}")
        x = _parse_float(attrs.get("x"), f"node {node} x", line)
        y = _parse_float(attrs.get("y"), f"node {node} y", line)
        positions[node] = (x, y)

    edges: dict[tuple[NodeId, NodeId], float] = {}
    for line, attrs in handler.edges:
        u = _parse_int(attrs.get("source"), "edge source", line)
        v = _parse_int(attrs.get("target"), "edge target", line)
        for end in (u, v):
            if end not in positions:
                raise SchemaError(f"line {line}: edge {u}->{v} references undeclared node {end}")
        w = _parse_float(attrs.get("weight"), f"edge {u}->{v} weight", line)
        if not w > 0.0 or math.isinf(w):
            raise ValidationError(f"line {line}: edge {u}->{v} has non-positive weight {w}")
        if (u, v) in edges:
            raise SchemaError(f"line {line}: duplicate edge {u}->{v}")
        edges[(u, v)] = w
    return RoadNetwork(positions, edges)


def dump_network(net: RoadNetwork) -> bytes:
    """Serialise ``net`` to GraphML-style XML, sorted by id for byte stability."""
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<graphml xmlns="{GRAPHML_NS}">',
        '  <graph id="G" edgedefault="directed">',
    ]
    for node in net.nodes:
        x, y = net.position(node)
        out.append(f'    <node id="{node}" x="{x!r}" y="{y!r}"/>')
    for (u, v), w in sorted(net.edges.items()):
        out.append(f'    <edge source="{u}" target="{v}" weight="{w!r}"/>')
    out.append("  </graph>")
    out.append("</graphml>")
    return ("\n".join(out) + "\n").encode("utf-8")


# -- generation -----------------------------------------------------------


def _reach(adjacency: dict[int, set[int]], start: int) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for v in adjacency[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


class _ArcSet:
    """Mutable directed graph used while shaping a generated network."""

    def __init__(self, nodes: Iterable[int]):
        self.out: dict[int, set[int]] = {v: set() for v in nodes}
        self.inn: dict[int, set[int]] = {v: set() for v in self.out}
        self.count = 0

    def add(self, u: int, v: int) -> None:
        if v not in self.out[u]:
            self.out[u].add(v)
            self.inn[v].add(u)
            self.count += 1

    def remove(self, u: int, v: int) -> None:
        self.out[u].discard(v)
        self.inn[v].discard(u)
        self.count -= 1

    def has(self, u: int, v: int) -> bool:
        return v in self.out[u]

    def arcs(self) -> list[tuple[int, int]]:
        return sorted((u, v) for u in self.out for v in self.out[u])

    def components(self) -> int:
        """Number of strongly connected components (Kosaraju)."""
        order: list[int] = []
        seen: set[int] = set()
        for root in self.out:
            if root in seen:
                continue
            seen.add(root)
            stack = [(root, iter(sorted(self.out[root])))]
            while stack:
                node, it = stack[-1]
                nxt = next((w for w in it if w not in seen), None)
                if nxt is None:
                    stack.pop()
                    order.append(node)
                else:
                    seen.add(nxt)
                    stack.append((nxt, iter(sorted(self.out[nxt]))))
        assigned: set[int] = set()
        comps = 0
        for root in reversed(order):
            if root in assigned:
                continue
            comps += 1
            assigned |= self._back(root, assigned)
        return comps

    def _back(self, root: int, assigned: set[int]) -> set[int]:
        seen = {root}
        stack = [root]
        while stack:
            u = stack.pop()
            for w in self.inn[u]:
                if w not in seen and w not in assigned:
                    seen.add(w)
                    stack.append(w)
        return seen


def generate_network(
    node_count: int,
    edge_count: int,
    seed: int,
    seconds_per_unit: float = SECONDS_PER_UNIT,
) -> RoadNetwork:
    """Build a seeded grid-like road network with exactly the requested counts.

    Nodes sit on a jittered grid twice as wide as it is tall, and
    neighbouring nodes are joined by streets whose one-way directions
    alternate from row to row and column to column. Streets are then made
    two-way (or extra nearest-neighbour streets added, or arcs dropped)
    until there are exactly ``edge_count`` directed edges. The result is
    strongly connected whenever ``edge_count >= node_count``; with fewer
    edges every left-quartile node still reaches every right-quartile node.
    Weights are Euclidean length times ``seconds_per_unit``.
    """
    n, m = node_count, edge_count
    if n < 2 or m < 1:
        raise ParameterError(f"need node_count >= 2 and edge_count >= 1, got ({n}, {m})")
    if m < n - 1 or m > n * (n - 1):
        raise ParameterError(f"edge_count {m} infeasible for {n} nodes")

    for attempt in range(GENERATION_RETRIES):
        rng = random.Random(f"avcoord-network:{seed}:{attempt}")
        net = _try_generate(n, m, rng, seconds_per_unit)
        if net is not None:
            return net
    # Very sparse budgets (m close to n) defeat the street grid; thread a
    # ring (or a left-to-right chain) through the nodes instead.
    net = _fallback(n, m, random.Random(f"avcoord-network:{seed}:ring"), seconds_per_unit)
    if net is None:
        raise GenerationError(f"could not generate a connected {n}-node/{m}-edge network", seed)
    return net


def _layout(n: int, rng: random.Random) -> tuple[dict[int, tuple[float, float]], dict[tuple[int, int], int]]:
    cols = max(1, round(math.sqrt(2 * n)))
    rows = math.ceil(n / cols)
    slots = sorted(rng.sample(range(rows * cols), n))
    positions: dict[int, tuple[float, float]] = {}
    cell: dict[tuple[int, int], int] = {}
    for node, slot in enumerate(slots):
        r, c = divmod(slot, cols)
        cell[(r, c)] = node
        positions[node] = (
            round(c + rng.uniform(-JITTER, JITTER), 3),
            round(r + rng.uniform(-JITTER, JITTER), 3),
        )
    return positions, cell


def _weights(positions, arcs, seconds_per_unit: float) -> dict[tuple[int, int], float]:
    return {
        (u, v): max(0.001, round(math.dist(positions[u], positions[v]) * seconds_per_unit, 3))
        for u, v in arcs
    }


def _fallback(n: int, m: int, rng: random.Random, seconds_per_unit: float) -> RoadNetwork | None:
    positions, cell = _layout(n, rng)
    if m >= n:
        # Serpentine ring: rows alternate direction, then close the loop.
        order = [cell[k] for k in sorted(cell, key=lambda rc: (rc[0], rc[1] if rc[0] % 2 == 0 else -rc[1]))]
        arcs = {(order[i], order[(i + 1) % n]) for i in range(n)}
    else:
        order = sorted(positions, key=lambda i: (positions[i][0], i))
        arcs = {(order[i], order[i + 1]) for i in range(n - 1)}
    rest = sorted(
        ((u, v) for u in positions for v in positions if u != v and (u, v) not in arcs),
        key=lambda e: (math.dist(positions[e[0]], positions[e[1]]), e),
    )
    arcs.update(rest[: m - len(arcs)])
    if len(arcs) != m:
        return None
    return RoadNetwork(positions, _weights(positions, arcs, seconds_per_unit))


def _try_generate(n: int, m: int, rng: random.Random, seconds_per_unit: float) -> RoadNetwork | None:
    positions, cell = _layout(n, rng)

    def dist(a: int, b: int) -> float:
        (xa, ya), (xb, yb) = positions[a], positions[b]
        return math.hypot(xa - xb, ya - yb)

    g = _ArcSet(positions)
    streets: set[tuple[int, int]] = set()
    for (r, c), v in cell.items():
        right, up = cell.get((r, c + 1)), cell.get((r + 1, c))
        if right is not None:
            g.add(*((v, right) if r % 2 == 0 else (right, v)))
            streets.add((min(v, right), max(v, right)))
        if up is not None:
            g.add(*((v, up) if c % 2 == 0 else (up, v)))
            streets.add((min(v, up), max(v, up)))

    # Spare streets between near neighbours, for bridging holes and for budget.
    k = min(NEIGHBOURS, n - 1)
    while True:
        spare: set[tuple[int, int]] = set()
        for a in positions:
            near = sorted((b for b in positions if b != a), key=lambda b: (dist(a, b), b))[:k]
            spare.update((min(a, b), max(a, b)) for b in near)
        spare -= streets
        if 2 * (len(streets) + len(spare)) >= m or k >= n - 1:
            break
        k += 1
    spare_arcs = [arc for a, b in sorted(spare, key=lambda p: (dist(*p), p)) for arc in ((a, b), (b, a))]

    q = _quartile_size(n)
    by_x = sorted(positions, key=lambda i: (positions[i][0], i))
    left, right = by_x[:q], by_x[n - q:]
    strong = m >= n

    def score() -> int:
        if strong:
            return -g.components()
        targets = set(right)
        return sum(len(targets & _reach(g.out, s)) for s in left)

    goal = -1 if strong else len(left) * len(right)

    # Connect: add reverse arcs or spare arcs that improve connectivity.
    reverse = [(v, u) for u, v in g.arcs() if not g.has(v, u)]
    rng.shuffle(reverse)
    current = score()
    for u, v in reverse + spare_arcs:
        if current >= goal:
            break
        if g.has(u, v):
            continue
        g.add(u, v)
        new = score()
        if new > current:
            current = new
        else:
            g.remove(u, v)
    if current < goal:
        return None

    if g.count < m:
        upgrades = [(v, u) for u, v in g.arcs() if not g.has(v, u)]
        rng.shuffle(upgrades)
        for u, v in upgrades + spare_arcs:
            if g.count == m:
                break
            if not g.has(u, v):
                g.add(u, v)
    elif g.count > m:
        # Drop arcs between well-connected nodes first.
        blocked: set[tuple[int, int]] = set()
        while g.count > m:
            options = [
                (-min(len(g.out[u]), len(g.inn[v])), -int(g.has(v, u)), rng.random(), u, v)
                for u, v in g.arcs()
                if (u, v) not in blocked
            ]
            if not options:
                return None
            *_, u, v = min(options)
            g.remove(u, v)
            if score() < goal:
                g.add(u, v)
                blocked.add((u, v))
    if g.count != m:
        return None
    return RoadNetwork(positions, _weights(positions, g.arcs(), seconds_per_unit))
