"""
Priority-vector genotype and the greedy route decoder.

Both optimizers search over the same genotype: one real priority per
waypoint in [-200, 100]. A route is grown from the start by repeatedly
stepping to the highest-priority neighbor that can still make the goal in
time. Visited waypoints are marked with a large negative priority and
traversed edges are dropped from the working adjacency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from planning.errors import CodecError
from planning.network import OperationNetwork


PRIORITY_LOW = -200.0
PRIORITY_HIGH = 100.0
VISITED_PRIORITY = -1.0e6

PriorityVector = npt.NDArray[np.float64]


class Termination(str, Enum):
    REACHED_GOAL = "ReachedGoal"
    DEAD_END = "DeadEnd"
    TIME_EXCEEDED = "TimeExceeded"


@dataclass(frozen=True)
class Route:
    node_sequence: Tuple[int, ...]
    edge_sequence: Tuple[int, ...]
    feasible: bool
    termination: Termination
    elapsed: float = 0.0

    @property
    def start(self) -> int:
        return self.node_sequence[0]

    @property
    def end(self) -> int:
        return self.node_sequence[-1]

    def to_line(self) -> str:
        nodes = ",".join(str(n) for n in self.node_sequence)
        return f"{nodes}|{self.termination.value}|{str(self.feasible).lower()}"


def random_priority_vector(waypoint_count: int, rng: np.random.Generator) -> PriorityVector:
    if waypoint_count < 2:
        raise CodecError("priority vector needs at least two waypoints")
    return rng.uniform(PRIORITY_LOW, PRIORITY_HIGH, size=waypoint_count)


def clamp(pv: npt.ArrayLike) -> PriorityVector:
    return np.clip(np.asarray(pv, dtype=np.float64), PRIORITY_LOW, PRIORITY_HIGH)


# (neighbor id, edge index, traversal time in seconds)
Option = Tuple[int, int, float]


@dataclass(frozen=True)
class DecodeContext:
    """
    Frozen view of a network for decoding: per-node neighbor options with
    traversal times at the current positions, plus an admissible
    time-to-goal bound (straight line at full speed, no task time).
    """

    neighbors: Tuple[Tuple[Option, ...], ...]
    lower_bound: Tuple[float, ...]
    start: int
    goal: int

    @property
    def size(self) -> int:
        return len(self.neighbors)

    @classmethod
    def from_network(
        cls,
        network: OperationNetwork,
        start_id: int | None = None,
        goal_id: int | None = None,
    ) -> "DecodeContext":
        start = network.start_id if start_id is None else start_id
        goal = network.goal_id if goal_id is None else goal_id
        pos = [w.current.as_tuple() for w in network.waypoints]
        speed = network.vehicle_speed

        neighbors = []
        for i, adj in enumerate(network.adjacency):
            opts = []
            for j, e in adj:
                t = math.dist(pos[i], pos[j]) / speed + network.edges[e].task.duration
                opts.append((j, e, t))
            neighbors.append(tuple(opts))
        lower = tuple(math.dist(p, pos[goal]) / speed for p in pos)
        return cls(tuple(neighbors), lower, start, goal)


def _has_onward(
    ctx: DecodeContext,
    option: Option,
    elapsed: float,
    budget: float,
    marked: List[bool],
    used: set[int],
) -> bool:
    node, _, t = option
    reached = elapsed + t
    for m, e, t2 in ctx.neighbors[node]:
        if marked[m] or e in used:
            continue
        if reached + t2 + ctx.lower_bound[m] <= budget:
            return True
    return False


def decode_with_context(
    pv: Sequence[float],
    ctx: DecodeContext,
    t_available: float,
    visited: Iterable[int] = (),
) -> Route:
    if len(pv) != ctx.size:
        raise CodecError(f"priority vector has {len(pv)} entries, network has {ctx.size} waypoints")
    if not t_available > 0:
        raise CodecError("time budget must be positive")

    work = [float(v) for v in pv]
    marked = [False] * ctx.size
    for v in visited:
        marked[v] = True
        work[v] = VISITED_PRIORITY

    current = ctx.start
    marked[current] = True
    work[current] = VISITED_PRIORITY
    used: set[int] = set()
    nodes: List[int] = [current]
    edges: List[int] = []
    leg_times: List[float] = []
    elapsed = 0.0
    termination = Termination.REACHED_GOAL

    while current != ctx.goal:
        options = [o for o in ctx.neighbors[current] if not marked[o[0]] and o[1] not in used]
        if not options:
            termination = Termination.DEAD_END
            break

        survivors = [o for o in options if elapsed + o[2] + ctx.lower_bound[o[0]] <= t_available]
        goal_option = next((o for o in options if o[0] == ctx.goal), None)

        if not survivors:
            if goal_option is None:
                termination = Termination.TIME_EXCEEDED
                break
            # Goal is adjacent but over budget: finish anyway, flagged infeasible below.
            choice = goal_option
        elif goal_option in survivors and all(
            not _has_onward(ctx, o, elapsed, t_available, marked, used)
            for o in survivors
            if o[0] != ctx.goal
        ):
            choice = goal_option
        else:
            choice = max(survivors, key=lambda o: (work[o[0]], -o[0]))

        node, edge, t = choice
        used.add(edge)
        marked[node] = True
        work[node] = VISITED_PRIORITY
        elapsed += t
        leg_times.append(t)
        nodes.append(node)
        edges.append(edge)
        current = node

    # Reported time is summed the way route metrics sum legs.
    total = math.fsum(leg_times)
    feasible = termination is Termination.REACHED_GOAL and total <= t_available
    return Route(tuple(nodes), tuple(edges), feasible, termination, total)


def decode_route(
    pv: Sequence[float],
    network: OperationNetwork,
    t_available: float,
    start_id: int | None = None,
    visited: Iterable[int] = (),
) -> Route:
    """Decode ``pv`` on the network's current positions. ``pv`` is never modified."""
    return decode_with_context(pv, DecodeContext.from_network(network, start_id), t_available, visited)
