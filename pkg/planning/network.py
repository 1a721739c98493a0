"""
Operation network: waypoints, task-bearing undirected edges, drift.

Static waypoints never move. Dynamic waypoints drift around a fixed anchor
(``base``); every draw is a fresh truncated-normal offset from that anchor,
so a node never leaves its bound no matter how often it is perturbed.
"""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Sequence, Tuple

import networkx as nx
import numpy as np
import numpy.typing as npt
from scipy.spatial.distance import pdist, squareform
from scipy.stats import norm

from planning.errors import InfeasibleTerrainError, InvalidSnapshotError, NoSuchEdgeError, PlannerError
from planning.terrain import TerrainGrid, is_valid_position


logger = logging.getLogger(__name__)

DEFAULT_MAX_TRIES = 10_000
Pair = Tuple[int, int]


@dataclass(frozen=True)
class Position3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise ValueError(f"non-finite position {self}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    def as_array(self) -> npt.NDArray[np.float64]:
        return np.array(self.as_tuple(), dtype=np.float64)

    @classmethod
    def from_seq(cls, values: Sequence[float]) -> "Position3":
        return cls(float(values[0]), float(values[1]), float(values[2]))


ORIGIN = Position3(0.0, 0.0, 0.0)


class WaypointKind(str, Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"


@dataclass
class Waypoint:
    id: int
    base: Position3
    current: Position3
    kind: WaypointKind = WaypointKind.STATIC
    sigma: Position3 = ORIGIN
    bound: Position3 = ORIGIN

    @property
    def is_dynamic(self) -> bool:
        return self.kind is WaypointKind.DYNAMIC


@dataclass(frozen=True)
class Task:
    priority: float
    risk: float
    duration: float

    def __post_init__(self):
        if not self.priority > 0:
            raise ValueError("task priority must be > 0")
        if not 0 < self.risk <= 100:
            raise ValueError("task risk must lie in (0, 100]")
        if not self.duration >= 0:
            raise ValueError("task duration must be >= 0")


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    task: Task

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError("self-loop edge")

    @property
    def pair(self) -> Pair:
        return (min(self.i, self.j), max(self.i, self.j))


@dataclass(frozen=True)
class TaskRanges:
    priority: Tuple[float, float] = (1.0, 10.0)
    risk: Tuple[float, float] = (5.0, 100.0)
    duration: Tuple[float, float] = (60.0, 600.0)

    def __post_init__(self):
        for name in ("priority", "risk", "duration"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} range is inverted: ({lo}, {hi})")
        if not self.risk[0] > 0 or self.risk[1] > 100:
            raise ValueError("risk range must lie within (0, 100]")
        if not self.priority[0] > 0:
            raise ValueError("priority range must be positive")
        if self.duration[0] < 0:
            raise ValueError("duration range must be non-negative")


@dataclass
class OperationNetwork:
    waypoints: List[Waypoint]
    edges: List[Edge]
    start_id: int
    goal_id: int
    vehicle_speed: float = 1.5
    k_neighbors: int = 5
    task_ranges: TaskRanges = field(default_factory=TaskRanges)
    terrain: TerrainGrid | None = None
    adjacency: List[List[Tuple[int, int]]] = field(init=False, repr=False)
    _edge_lookup: Dict[Pair, int] = field(init=False, repr=False)

    def __post_init__(self):
        if self.start_id == self.goal_id:
            raise PlannerError("start and goal must differ")
        if not self.vehicle_speed > 0:
            raise PlannerError("vehicle speed must be positive")
        n = len(self.waypoints)
        if not (0 <= self.start_id < n and 0 <= self.goal_id < n):
            raise PlannerError("start/goal outside the waypoint range")
        self.reindex()

    def reindex(self) -> None:
        """Recompute adjacency lists and the pair lookup from ``edges``."""
        n = len(self.waypoints)
        self.adjacency = [[] for _ in range(n)]
        self._edge_lookup = {}
        for idx, edge in enumerate(self.edges):
            if edge.pair in self._edge_lookup:
                raise PlannerError(f"duplicate edge {edge.pair}")
            self._edge_lookup[edge.pair] = idx
            self.adjacency[edge.i].append((edge.j, idx))
            self.adjacency[edge.j].append((edge.i, idx))
        for nbrs in self.adjacency:
            nbrs.sort()
        if not nx.has_path(self.to_graph(), self.start_id, self.goal_id):
            raise PlannerError("goal is unreachable from start")

    def __len__(self) -> int:
        return len(self.waypoints)

    def edge_index(self, i: int, j: int) -> int:
        try:
            return self._edge_lookup[(min(i, j), max(i, j))]
        except KeyError:
            raise NoSuchEdgeError(i, j) from None

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self._edge_lookup

    def pairs(self) -> set[Pair]:
        return set(self._edge_lookup)

    def positions(self) -> npt.NDArray[np.float64]:
        return np.array([w.current.as_tuple() for w in self.waypoints], dtype=np.float64)

    def base_positions(self) -> npt.NDArray[np.float64]:
        return np.array([w.base.as_tuple() for w in self.waypoints], dtype=np.float64)

    def dynamic_ids(self) -> List[int]:
        return [w.id for w in self.waypoints if w.is_dynamic]

    def copy(self) -> "OperationNetwork":
        # Terrain is immutable; share it instead of copying the raster.
        return copy.deepcopy(self, memo={id(self.terrain): self.terrain})

    def to_graph(self) -> nx.Graph:
        graph = nx.Graph(
            start=self.start_id,
            goal=self.goal_id,
            speed=self.vehicle_speed,
            k_neighbors=self.k_neighbors,
            priority_range=list(self.task_ranges.priority),
            risk_range=list(self.task_ranges.risk),
            duration_range=list(self.task_ranges.duration),
        )
        for w in self.waypoints:
            graph.add_node(
                w.id,
                kind=w.kind.value,
                base=list(w.base.as_tuple()),
                current=list(w.current.as_tuple()),
                sigma=list(w.sigma.as_tuple()),
                bound=list(w.bound.as_tuple()),
            )
        for e in self.edges:
            graph.add_edge(e.i, e.j, rho=e.task.priority, xi=e.task.risk, delta=e.task.duration)
        return graph

    @classmethod
    def from_graph(cls, graph: nx.Graph, terrain: TerrainGrid | None = None) -> "OperationNetwork":
        waypoints = []
        for node_id in sorted(graph.nodes):
            data = graph.nodes[node_id]
            waypoints.append(
                Waypoint(
                    id=int(node_id),
                    base=Position3.from_seq(data["base"]),
                    current=Position3.from_seq(data.get("current", data["base"])),
                    kind=WaypointKind(data["kind"]),
                    sigma=Position3.from_seq(data.get("sigma", (0.0, 0.0, 0.0))),
                    bound=Position3.from_seq(data["bound"]),
                )
            )
        if [w.id for w in waypoints] != list(range(len(waypoints))):
            raise PlannerError("waypoint ids must be 0..n-1")
        edges = [
            Edge(int(u), int(v), Task(float(d["rho"]), float(d["xi"]), float(d["delta"])))
            for u, v, d in sorted(graph.edges(data=True), key=lambda e: (min(e[0], e[1]), max(e[0], e[1])))
        ]
        attrs = graph.graph
        ranges = TaskRanges(
            priority=tuple(attrs.get("priority_range", (1.0, 10.0))),
            risk=tuple(attrs.get("risk_range", (5.0, 100.0))),
            duration=tuple(attrs.get("duration_range", (60.0, 600.0))),
        )
        return cls(
            waypoints=waypoints,
            edges=edges,
            start_id=int(attrs["start"]),
            goal_id=int(attrs["goal"]),
            vehicle_speed=float(attrs["speed"]),
            k_neighbors=int(attrs.get("k_neighbors", 5)),
            task_ranges=ranges,
            terrain=terrain,
        )


# ---------------------------------------------------------------------------
# Waypoint sampling and drift
# ---------------------------------------------------------------------------

def sample_static_waypoints(
    count: int,
    terrain: TerrainGrid | None,
    extent: Tuple[float, float, float],
    rng: np.random.Generator,
    max_tries: int = DEFAULT_MAX_TRIES,
) -> List[Waypoint]:
    """Draw ``count`` static waypoints uniformly in ``extent``, rejecting Forbidden cells."""
    if count < 2:
        raise ValueError("need at least two waypoints")
    if terrain is not None and terrain.valid_cells == 0:
        raise InfeasibleTerrainError("terrain has no valid cell")

    upper = np.asarray(extent, dtype=np.float64)
    waypoints: List[Waypoint] = []
    for idx in range(count):
        for _ in range(max_tries):
            x, y, z = rng.uniform(0.0, upper)
            if terrain is None or is_valid_position(terrain, x, y):
                pos = Position3(float(x), float(y), float(z))
                waypoints.append(Waypoint(id=idx, base=pos, current=pos))
                break
        else:
            raise InfeasibleTerrainError(
                f"no valid position for waypoint {idx} after {max_tries} draws"
            )
    return waypoints


def two_sided_quantile(confidence: float) -> float:
    """z such that P(|Z| <= z) = confidence for a standard normal Z."""
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    return float(norm.ppf(0.5 + confidence / 2.0))


def make_dynamic(
    waypoints: List[Waypoint],
    ids: Iterable[int],
    sigma: Tuple[float, float, float],
    confidence: float = 0.98,
) -> List[Waypoint]:
    z = two_sided_quantile(confidence)
    sigma_pos = Position3.from_seq(sigma)
    bound = Position3(z * sigma_pos.x, z * sigma_pos.y, z * sigma_pos.z)
    for idx in ids:
        w = waypoints[idx]
        w.kind = WaypointKind.DYNAMIC
        w.sigma = sigma_pos
        w.bound = bound
    return waypoints


def truncated_normal(
    rng: np.random.Generator,
    sigma: float,
    bound: float,
    size: int = 1,
) -> npt.NDArray[np.float64]:
    """Rejection-sample N(0, sigma^2) restricted to [-bound, +bound]."""
    if sigma <= 0 or bound <= 0:
        return np.zeros(size)
    out = np.empty(size)
    filled = 0
    while filled < size:
        draw = rng.normal(0.0, sigma, size=size - filled)
        keep = draw[np.abs(draw) <= bound]
        out[filled:filled + len(keep)] = keep
        filled += len(keep)
    return out


def _draw_offset(rng: np.random.Generator, w: Waypoint) -> npt.NDArray[np.float64]:
    return np.array(
        [truncated_normal(rng, s, b)[0] for s, b in zip(w.sigma.as_tuple(), w.bound.as_tuple())]
    )


def perturb_dynamic(
    network: OperationNetwork,
    rng: np.random.Generator,
    max_tries: int = DEFAULT_MAX_TRIES,
) -> Dict[int, float]:
    """
    Move every dynamic waypoint to a fresh truncated-normal offset from its anchor.

    Returns the drift of each dynamic node relative to where it was before
    the call. A node whose offsets keep landing on land past ``max_tries``
    stays where it was.
    """
    summary: Dict[int, float] = {}
    for w in network.waypoints:
        if not w.is_dynamic:
            continue
        base = w.base.as_array()
        for _ in range(max_tries):
            cand = base + _draw_offset(rng, w)
            if network.terrain is None or is_valid_position(network.terrain, cand[0], cand[1]):
                break
        else:
            logger.warning("Waypoint %d kept its position: no valid drift in %d tries", w.id, max_tries)
            cand = w.current.as_array()
        previous = w.current.as_array()
        w.current = Position3.from_seq(cand)
        summary[w.id] = float(np.linalg.norm(cand - previous))
    if summary:
        logger.debug("Drift applied: max %.3f m over %d nodes", max(summary.values()), len(summary))
    return summary


# ---------------------------------------------------------------------------
# Topology
# ---------------------------------------------------------------------------

def build_adjacency(points: npt.ArrayLike, k_neighbors: int) -> List[Pair]:
    """
    Undirected kNN pairs on ``points`` (Euclidean), repaired to a single
    component by adding the shortest bridging pairs first.

    Distance ties resolve toward the lower waypoint id.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    if n < 2:
        raise ValueError("need at least two waypoints")
    if k_neighbors < 1:
        raise ValueError("k_neighbors must be >= 1")

    dist = squareform(pdist(pts))
    np.fill_diagonal(dist, np.inf)
    k = min(k_neighbors, n - 1)

    pairs: set[Pair] = set()
    for i in range(n):
        for j in np.argsort(dist[i], kind="stable")[:k]:
            pairs.add((min(i, int(j)), max(i, int(j))))

    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    graph.add_edges_from(pairs)
    if not nx.is_connected(graph):
        uf = nx.utils.UnionFind(range(n))
        for comp in nx.connected_components(graph):
            uf.union(*comp)
        bridges = sorted(
            (dist[i, j], i, j)
            for i in range(n)
            for j in range(i + 1, n)
            if uf[i] != uf[j]
        )
        for _, i, j in bridges:
            if uf[i] != uf[j]:
                pairs.add((i, j))
                uf.union(i, j)

    return sorted(pairs)


def _draw_task(ranges: TaskRanges, rng: np.random.Generator) -> Task:
    return Task(
        priority=float(rng.uniform(*ranges.priority)),
        risk=float(rng.uniform(*ranges.risk)),
        duration=float(rng.uniform(*ranges.duration)),
    )


def assign_tasks(pairs: Sequence[Pair], ranges: TaskRanges, rng: np.random.Generator) -> List[Edge]:
    """One independently drawn (rho, xi, delta) per pair, in pair order."""
    return [Edge(i, j, _draw_task(ranges, rng)) for i, j in pairs]


def rebuild_adjacency(network: OperationNetwork, rng: np.random.Generator) -> bool:
    """
    Rebuild topology on current positions. Surviving pairs keep their task,
    new pairs get a fresh one. Returns whether the edge set changed.
    """
    old = {e.pair: e for e in network.edges}
    new_pairs = build_adjacency(network.positions(), network.k_neighbors)
    if set(new_pairs) == set(old):
        return False
    network.edges = [
        old[p] if p in old else Edge(p[0], p[1], _draw_task(network.task_ranges, rng))
        for p in new_pairs
    ]
    network.reindex()
    logger.info("Adjacency rebuilt: %d edges (%d new)", len(new_pairs), len(set(new_pairs) - set(old)))
    return True


# ---------------------------------------------------------------------------
# Distances and deformation
# ---------------------------------------------------------------------------

def edge_distance(network: OperationNetwork, i: int, j: int) -> float:
    network.edge_index(i, j)
    return math.dist(network.waypoints[i].current.as_tuple(), network.waypoints[j].current.as_tuple())


def edge_traversal_time(network: OperationNetwork, i: int, j: int) -> float:
    task = network.edges[network.edge_index(i, j)].task
    return edge_distance(network, i, j) / network.vehicle_speed + task.duration


def snapshot_positions(network: OperationNetwork) -> npt.NDArray[np.float64]:
    return network.positions()


def drift_by_node(network: OperationNetwork, reference: npt.ArrayLike) -> npt.NDArray[np.float64]:
    ref = np.asarray(reference, dtype=np.float64)
    if ref.shape != (len(network), 3):
        raise InvalidSnapshotError(
            f"snapshot has shape {ref.shape}, network has {len(network)} waypoints"
        )
    return np.linalg.norm(network.positions() - ref, axis=1)


def deformation_since(network: OperationNetwork, reference: npt.ArrayLike) -> Tuple[float, bool]:
    drift = drift_by_node(network, reference)
    dynamic = network.dynamic_ids()
    max_drift = float(drift[dynamic].max()) if dynamic else 0.0
    changed = set(build_adjacency(network.positions(), network.k_neighbors)) != network.pairs()
    return max_drift, changed
