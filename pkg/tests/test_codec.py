import math

import numpy as np
import pytest

from planning.codec import (
    PRIORITY_HIGH,
    PRIORITY_LOW,
    Termination,
    clamp,
    decode_route,
    random_priority_vector,
)
from planning.errors import CodecError

from conftest import build_network, random_network


def reference_decode(pv, network, budget, start=None, visited=()):
    """Step-by-step decoder written against the networkx view."""
    graph = network.to_graph()
    pos = {w.id: w.current.as_tuple() for w in network.waypoints}
    goal = network.goal_id
    current = network.start_id if start is None else start
    speed = network.vehicle_speed

    def leg(a, b):
        return math.dist(pos[a], pos[b]) / speed + graph.edges[a, b]["delta"]

    def lower(n):
        return math.dist(pos[n], pos[goal]) / speed

    marked = set(visited) | {current}
    used = set()
    nodes, elapsed = [current], 0.0
    while current != goal:
        options = [n for n in sorted(graph.neighbors(current)) if n not in marked and frozenset((current, n)) not in used]
        if not options:
            return nodes, Termination.DEAD_END
        survivors = [n for n in options if elapsed + leg(current, n) + lower(n) <= budget]

        def onward(n):
            reached = elapsed + leg(current, n)
            return any(
                m not in marked and frozenset((n, m)) not in used and reached + leg(n, m) + lower(m) <= budget
                for m in graph.neighbors(n)
            )

        if not survivors:
            if goal not in options:
                return nodes, Termination.TIME_EXCEEDED
            nxt = goal
        elif goal in survivors and not any(onward(n) for n in survivors if n != goal):
            nxt = goal
        else:
            nxt = max(survivors, key=lambda n: (pv[n], -n))
        used.add(frozenset((current, nxt)))
        marked.add(nxt)
        elapsed += leg(current, nxt)
        nodes.append(nxt)
        current = nxt
    return nodes, Termination.REACHED_GOAL


def test_follows_highest_priority(diamond):
    route = decode_route([0.0, 50.0, -50.0, 0.0], diamond, 1000.0)
    assert route.node_sequence == (0, 1, 3)
    assert route.termination is Termination.REACHED_GOAL and route.feasible
    assert route.elapsed == pytest.approx(200.0)
    assert route.to_line() == "0,1,3|ReachedGoal|true"


def test_detour_when_it_fits(diamond):
    route = decode_route([0.0, 50.0, 10.0, -100.0], diamond, 1000.0)
    assert route.node_sequence == (0, 1, 2, 3)
    assert len(set(route.edge_sequence)) == 3


def test_lookahead_prunes_detour(diamond):
    # 0 -> 1 takes 100 s; the detour through 2 would need 100 + 141.4 + 100.
    route = decode_route([0.0, 50.0, 10.0, -100.0], diamond, 250.0)
    assert route.node_sequence == (0, 1, 3)
    assert route.feasible


def test_goal_preferred_when_nothing_else_continues(diamond):
    # From 2 with 1 already flown, node 0 outranks the goal but leads nowhere.
    route = decode_route([90.0, 0.0, 50.0, -100.0], diamond, 1000.0, start_id=2, visited=[1])
    assert route.node_sequence == (2, 3)


def test_time_exceeded_at_start(diamond):
    route = decode_route([0.0, 1.0, 2.0, 3.0], diamond, 150.0)
    assert route.node_sequence == (0,)
    assert route.termination is Termination.TIME_EXCEEDED
    assert not route.feasible


def test_dead_end():
    network = build_network(
        [(0, 0, 0), (-100, 0, 0), (0, 100, 0), (0, 200, 0)],
        [(0, 1, (1.0, 10.0, 0.0)), (0, 2, (1.0, 10.0, 0.0)), (2, 3, (1.0, 10.0, 0.0))],
    )
    route = decode_route([0.0, 90.0, -90.0, 0.0], network, 1e4)
    assert route.node_sequence == (0, 1)
    assert route.termination is Termination.DEAD_END
    assert not route.feasible


def test_adjacent_goal_over_budget_is_taken_but_infeasible():
    network = build_network([(0, 0, 0), (100, 0, 0)], [(0, 1, (1.0, 10.0, 5.0))])
    route = decode_route([0.0, 0.0], network, 50.0)
    assert route.node_sequence == (0, 1)
    assert route.termination is Termination.REACHED_GOAL
    assert not route.feasible
    assert route.elapsed == pytest.approx(105.0)


def test_priority_ties_go_to_lower_id(diamond):
    route = decode_route([0.0, 7.0, 7.0, -100.0], diamond, 1000.0)
    assert route.node_sequence[1] == 1


def test_visited_nodes_are_skipped(diamond):
    route = decode_route([0.0, 100.0, 0.0, -100.0], diamond, 1000.0, visited=[1])
    assert 1 not in route.node_sequence
    assert route.node_sequence == (0, 2, 3)


def test_vector_is_not_modified(diamond):
    pv = np.array([1.0, 2.0, 3.0, 4.0])
    decode_route(pv, diamond, 1000.0)
    assert pv.tolist() == [1.0, 2.0, 3.0, 4.0]


def test_wrong_length_rejected(diamond):
    with pytest.raises(CodecError):
        decode_route([0.0, 1.0], diamond, 1000.0)
    with pytest.raises(CodecError):
        decode_route([0.0] * 4, diamond, 0.0)


def test_random_vectors_in_range():
    pv = random_priority_vector(40, np.random.default_rng(0))
    assert pv.shape == (40,)
    assert PRIORITY_LOW <= pv.min() and pv.max() <= PRIORITY_HIGH
    assert clamp([-500.0, 500.0]).tolist() == [PRIORITY_LOW, PRIORITY_HIGH]
    with pytest.raises(CodecError):
        random_priority_vector(1, np.random.default_rng(0))


def test_matches_reference_decoder():
    rng = np.random.default_rng(11)
    for seed in range(30):
        network = random_network(seed, count=int(rng.integers(5, 15)), k_neighbors=int(rng.integers(2, 5)))
        for _ in range(15):
            pv = random_priority_vector(len(network), rng)
            budget = float(rng.uniform(500.0, 9000.0))
            route = decode_route(pv, network, budget)
            nodes, termination = reference_decode(pv, network, budget)
            assert list(route.node_sequence) == nodes
            assert route.termination is termination


def check_route(route, network, budget):
    nodes, edges = route.node_sequence, route.edge_sequence
    assert nodes[0] == network.start_id
    assert len(set(nodes)) == len(nodes)
    assert len(set(edges)) == len(edges)
    assert len(edges) == len(nodes) - 1
    total = 0.0
    for (a, b), e in zip(zip(nodes, nodes[1:]), edges):
        assert network.edges[e].pair == (min(a, b), max(a, b))
        dist = np.linalg.norm(network.waypoints[a].current.as_array() - network.waypoints[b].current.as_array())
        total += dist / network.vehicle_speed + network.edges[e].task.duration
    if route.feasible:
        assert nodes[-1] == network.goal_id
        assert total <= budget + 1e-9


def feasibility_suite(pairs, seed):
    rng = np.random.default_rng(seed)
    networks = [random_network(1000 + i, count=int(rng.integers(4, 25)), k_neighbors=int(rng.integers(1, 6))) for i in range(50)]
    feasible = 0
    for i in range(pairs):
        network = networks[i % len(networks)]
        budget = float(rng.uniform(300.0, 12000.0))
        route = decode_route(random_priority_vector(len(network), rng), network, budget)
        check_route(route, network, budget)
        feasible += route.feasible
    return feasible


def test_feasibility_properties():
    assert feasibility_suite(2000, seed=3) > 0


@pytest.mark.slow
def test_feasibility_properties_full_suite():
    assert feasibility_suite(10_000, seed=4) > 0
