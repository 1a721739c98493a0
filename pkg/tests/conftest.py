import sys
from pathlib import Path

import networkx as nx
import numpy as np
import pytest

root = Path(__file__).resolve().parents[1]
if str(root) not in sys.path:
    sys.path.insert(0, str(root))

from planning.network import (  # noqa: E402
    Edge,
    OperationNetwork,
    Position3,
    Task,
    TaskRanges,
    Waypoint,
    WaypointKind,
    assign_tasks,
    build_adjacency,
    sample_static_waypoints,
)

CONFIG_DIR = root / "config"
DATA_DIR = root / "data"


def build_network(positions, edges, start=0, goal=None, speed=1.0, k_neighbors=5, dynamic=(), sigma=(10.0, 10.0, 1.0)):
    """``edges``: iterable of (i, j, (priority, risk, duration))."""
    waypoints = []
    for idx, p in enumerate(positions):
        pos = Position3.from_seq(p)
        waypoints.append(Waypoint(id=idx, base=pos, current=pos))
    for idx in dynamic:
        w = waypoints[idx]
        w.kind = WaypointKind.DYNAMIC
        w.sigma = Position3.from_seq(sigma)
        w.bound = Position3(*(2.326 * s for s in sigma))
    return OperationNetwork(
        waypoints=waypoints,
        edges=[Edge(i, j, Task(*task)) for i, j, task in edges],
        start_id=start,
        goal_id=len(positions) - 1 if goal is None else goal,
        vehicle_speed=speed,
        k_neighbors=k_neighbors,
    )


def random_network(seed, count=8, k_neighbors=3, extent=(2000.0, 2000.0, 100.0), speed=1.5):
    rng = np.random.default_rng(seed)
    waypoints = sample_static_waypoints(count, None, extent, rng)
    base = np.array([w.base.as_tuple() for w in waypoints])
    pairs = build_adjacency(base, k_neighbors)
    edges = assign_tasks(pairs, TaskRanges(), rng)
    dist = np.linalg.norm(base - base[0], axis=1)
    return OperationNetwork(
        waypoints=waypoints,
        edges=edges,
        start_id=0,
        goal_id=int(np.argmax(dist)),
        vehicle_speed=speed,
        k_neighbors=k_neighbors,
    )


@pytest.fixture
def diamond():
    """
    Unit square, speed 1, zero task time::

        2 --- 3
        |  /  |
        0 --- 1

    start 0, goal 3.
    """
    return build_network(
        positions=[(0, 0, 0), (100, 0, 0), (0, 100, 0), (100, 100, 0)],
        edges=[
            (0, 1, (5.0, 10.0, 0.0)),
            (0, 2, (2.0, 40.0, 0.0)),
            (1, 2, (4.0, 20.0, 0.0)),
            (1, 3, (8.0, 16.0, 0.0)),
            (2, 3, (1.0, 50.0, 0.0)),
        ],
    )


@pytest.fixture
def demo_config_path():
    return CONFIG_DIR / "demo.toml"


def oracle_optimum(network, cfg):
    """Lowest cost over every simple start-goal path within budget, by enumeration."""
    graph = network.to_graph()
    pos = {w.id: w.current.as_array() for w in network.waypoints}
    best = None
    for path in nx.all_simple_paths(graph, network.start_id, network.goal_id):
        legs = list(zip(path, path[1:]))
        total = sum(
            float(np.linalg.norm(pos[a] - pos[b])) / network.vehicle_speed + graph.edges[a, b]["delta"]
            for a, b in legs
        )
        if total > cfg.t_available:
            continue
        ratio = sum(graph.edges[a, b]["xi"] / graph.edges[a, b]["rho"] for a, b in legs) / len(legs)
        cost = cfg.phi1 * abs(total - cfg.t_available) / cfg.t_available + cfg.phi2 * ratio
        if best is None or cost < best[0]:
            best = (cost, tuple(path))
    return best
