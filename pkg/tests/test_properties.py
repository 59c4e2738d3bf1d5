"""Property-based checks over small random networks and scenarios."""

from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from avcoord.config import CoordinationConfig
from avcoord.engine import ObstacleSchedule, run_scenario
from avcoord.metrics import percent_delta
from avcoord.network import (
    RoadNetwork,
    dump_network,
    load_network,
    shortest_path,
    shortest_path_excluding,
)

from oracles import brute_force_best


@st.composite
def networks(draw, max_nodes=8):
    n = draw(st.integers(2, max_nodes))
    pairs = [(u, v) for u in range(n) for v in range(n) if u != v]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs)))
    weights = st.one_of(st.integers(1, 9).map(float), st.floats(0.01, 50.0, allow_nan=False))
    edges = {e: draw(weights) for e in chosen}
    xs = draw(st.lists(st.floats(-100, 100, allow_nan=False), min_size=n, max_size=n))
    return RoadNetwork({i: (x, 0.0) for i, x in enumerate(xs)}, edges)


@st.composite
def queries(draw):
    net = draw(networks())
    s = draw(st.sampled_from(net.nodes))
    d = draw(st.sampled_from(net.nodes))
    banned = draw(st.sets(st.integers(-2, 10)))
    return net, s, d, banned


@given(queries())
def test_exclusion_soundness(q):
    net, s, d, banned = q
    route = shortest_path_excluding(net, s, d, banned)
    if route is not None:
        assert not (set(route.nodes[1:-1]) & banned)
        assert route.nodes[0] == s and route.nodes[-1] == d
        assert net.route_cost(route.nodes) == route.total_cost


@given(queries())
def test_exclusion_optimality(q):
    net, s, d, banned = q
    best = brute_force_best(net.edges, s, d, banned)
    route = shortest_path_excluding(net, s, d, banned)
    assert (route is None) == (best is None)
    if route is not None:
        assert route.total_cost == best[0]


@given(queries(), st.sets(st.integers(0, 7)))
def test_exclusion_monotonicity(q, more):
    net, s, d, banned = q
    small = shortest_path_excluding(net, s, d, banned)
    big = shortest_path_excluding(net, s, d, banned | more)
    if small is None:
        assert big is None
    elif big is not None:
        assert big.total_cost >= small.total_cost


@given(queries())
def test_search_is_deterministic(q):
    net, s, d, banned = q
    clone = load_network(dump_network(net))
    assert shortest_path_excluding(net, s, d, banned) == shortest_path_excluding(clone, s, d, banned)
    assert shortest_path(net, s, d) == shortest_path_excluding(net, s, d, ())


@given(networks())
def test_graphml_round_trip(net):
    data = dump_network(net)
    assert load_network(data) == net
    assert dump_network(load_network(data)) == data


@given(st.floats(0.01, 1e4), st.floats(0.0, 1e4))
def test_percent_delta_sign(base, other):
    delta = percent_delta(base, other)
    if other > base * 1.001:
        assert delta > 0
    elif other < base * 0.999:
        assert delta < 0


@st.composite
def scenarios(draw):
    net = draw(networks(max_nodes=7))
    nodes = net.nodes
    pairs = [(s, d) for s in nodes for d in nodes if s != d]
    fleet = draw(st.lists(st.sampled_from(pairs), min_size=1, max_size=4))
    endpoints = {n for p in fleet for n in p}
    free = [n for n in nodes if n not in endpoints]
    obstacles = draw(st.lists(st.sampled_from(free), unique=True, max_size=3)) if free else []
    times = draw(st.lists(st.sampled_from([0.0, 0.5, 2.0]), min_size=len(obstacles),
                          max_size=len(obstacles)))
    return net, fleet, ObstacleSchedule(tuple(zip(obstacles, times)), timeout=60.0)


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(scenarios(), st.integers(1, 6))
def test_scenario_invariants(scenario, number):
    net, fleet, schedule = scenario
    config = CoordinationConfig.from_number(number)
    result = run_scenario(net, fleet, schedule, config)
    assert len(result.per_vehicle) == len(fleet)
    assert result.broadcasts <= len(schedule.entries)
    for s in result.per_vehicle:
        assert 0.0 <= s.wait_time <= s.travel_time + 1e-9
        assert s.travel_time <= 60.0
        if not s.arrived:
            assert s.travel_time == 60.0
        times = [t for _, t in s.visit_log]
        assert times == sorted(times)
        if number <= 2:
            assert s.recalculations == 0
    if number == 1:
        assert result.avg_wait_time == 0.0
    again = run_scenario(net, fleet, schedule, config)
    assert [e.to_json() for e in again.events] == [e.to_json() for e in result.events]


@st.composite
def sizes(draw):
    n = draw(st.integers(2, 24))
    m = draw(st.integers(n - 1, min(n * (n - 1), 4 * n)))
    return n, m, draw(st.integers(0, 2**32))


@settings(max_examples=60, deadline=None)
@given(sizes())
def test_generator_counts_and_connectivity(size):
    from avcoord.network import generate_network

    n, m, seed = size
    net = generate_network(n, m, seed)
    assert (net.node_count, net.edge_count) == (n, m)
    if m >= n:
        assert all(net.reachable_from(v) == set(net.nodes) for v in net.nodes)
    else:
        for s in net.left_quartile():
            assert set(net.right_quartile()) <= net.reachable_from(s)
