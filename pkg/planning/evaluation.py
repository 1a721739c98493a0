"""
Route time, weight, violation and the weighted multi-objective cost.

Cost of a feasible route::

    phi1 * |T - T_avail| / T_avail  +  phi2 * mean(xi / rho over route edges)

Infeasible routes (dead end, out of time, or T > T_avail) cost
``infeasible_penalty + phi1 * |T - T_avail| / T_avail`` so that routes
closer to the budget still rank better among themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from planning.codec import DecodeContext, PriorityVector, Route, Termination, decode_with_context
from planning.errors import EvaluationError
from planning.network import Edge, OperationNetwork


class CostConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    phi1: float = Field(0.5, ge=0)
    phi2: float = Field(0.5, ge=0)
    t_available: float = Field(3.1e4, gt=0)
    infeasible_penalty: float = Field(1.0e6, gt=0)

    @model_validator(mode="after")
    def _weights_not_both_zero(self) -> "CostConfig":
        if self.phi1 + self.phi2 <= 0:
            raise ValueError("phi1 + phi2 must be positive")
        return self


@dataclass(frozen=True)
class Leg:
    """One flown or planned edge, frozen at the positions it was timed with."""

    edge: int
    distance: float
    time: float
    priority: float
    risk: float


CSV_FIELDS = ("feasible", "cost", "weight", "tasks", "time_s", "distance_m", "violation_s")


@dataclass(frozen=True)
class RouteMetrics:
    feasible: bool
    cost: float
    weight: float
    tasks_completed: int
    travel_time: float
    distance: float
    violation: float

    def as_row(self) -> dict:
        return {
            "feasible": self.feasible,
            "cost": self.cost,
            "weight": self.weight,
            "tasks": self.tasks_completed,
            "time_s": self.travel_time,
            "distance_m": self.distance,
            "violation_s": self.violation,
        }

    def csv_row(self) -> str:
        return ",".join(
            [str(self.feasible).lower(), f"{self.cost:.6f}", f"{self.weight:.6f}", str(self.tasks_completed)]
            + [f"{v:.6f}" for v in (self.travel_time, self.distance, self.violation)]
        )


def combine_cost(travel_time: float, mean_risk_ratio: float, feasible: bool, cfg: CostConfig) -> float:
    time_term = cfg.phi1 * abs(travel_time - cfg.t_available) / cfg.t_available
    if feasible:
        return time_term + cfg.phi2 * mean_risk_ratio
    return cfg.infeasible_penalty + time_term


def route_legs(route: Route, network: OperationNetwork) -> List[Leg]:
    """Legs of ``route`` at the network's current positions."""
    nodes, edges = route.node_sequence, route.edge_sequence
    if len(edges) != len(nodes) - 1:
        raise EvaluationError("route has mismatched node and edge sequences")
    legs = []
    for (i, j), e in zip(zip(nodes, nodes[1:]), edges):
        if not 0 <= e < len(network.edges):
            raise EvaluationError(f"route references missing edge {e}")
        edge: Edge = network.edges[e]
        if edge.pair != (min(i, j), max(i, j)):
            raise EvaluationError(f"edge {e} no longer joins waypoints {i} and {j}")
        d = math.dist(network.waypoints[i].current.as_tuple(), network.waypoints[j].current.as_tuple())
        legs.append(Leg(e, d, d / network.vehicle_speed + edge.task.duration, edge.task.priority, edge.task.risk))
    return legs


def metrics_from_legs(legs: Sequence[Leg], reached_goal: bool, cfg: CostConfig) -> RouteMetrics:
    travel_time = math.fsum(leg.time for leg in legs)
    feasible = reached_goal and travel_time <= cfg.t_available
    if feasible and not legs:
        raise EvaluationError("a goal-reaching route needs at least one edge")
    mean_ratio = math.fsum(leg.risk / leg.priority for leg in legs) / len(legs) if legs else 0.0
    return RouteMetrics(
        feasible=feasible,
        cost=combine_cost(travel_time, mean_ratio, feasible, cfg),
        weight=math.fsum(leg.priority / leg.risk for leg in legs),
        tasks_completed=len(legs),
        travel_time=travel_time,
        distance=math.fsum(leg.distance for leg in legs),
        violation=max(0.0, travel_time - cfg.t_available),
    )


def route_time(route: Route, network: OperationNetwork) -> float:
    return math.fsum(leg.time for leg in route_legs(route, network))


def route_weight(route: Route, network: OperationNetwork) -> float:
    return math.fsum(leg.priority / leg.risk for leg in route_legs(route, network))


def route_violation(route: Route, network: OperationNetwork, cfg: CostConfig) -> float:
    return max(0.0, route_time(route, network) - cfg.t_available)


def metrics(route: Route, network: OperationNetwork, cfg: CostConfig) -> RouteMetrics:
    return metrics_from_legs(
        route_legs(route, network), route.termination is Termination.REACHED_GOAL, cfg
    )


def route_cost(route: Route, network: OperationNetwork, cfg: CostConfig) -> float:
    return metrics(route, network, cfg).cost


class RouteEvaluator:
    """
    Decode-and-score against a frozen network snapshot. Built once per
    optimizer run; ``evaluate`` is pure and may be called from any thread.
    """

    def __init__(
        self,
        network: OperationNetwork,
        cfg: CostConfig,
        start_id: int | None = None,
        visited: Iterable[int] = (),
    ):
        self.cfg = cfg
        self.context = DecodeContext.from_network(network, start_id)
        self.visited: Tuple[int, ...] = tuple(visited)
        self.size = self.context.size
        self._ratio = [e.task.risk / e.task.priority for e in network.edges]

    def decode(self, pv: PriorityVector) -> Route:
        return decode_with_context(pv, self.context, self.cfg.t_available, self.visited)

    def cost_of(self, route: Route) -> float:
        edges = route.edge_sequence
        # Summed exactly as metrics_from_legs.
        feasible = route.termination is Termination.REACHED_GOAL and route.elapsed <= self.cfg.t_available
        mean_ratio = math.fsum(self._ratio[e] for e in edges) / len(edges) if edges else 0.0
        if feasible and not edges:
            raise EvaluationError("a goal-reaching route needs at least one edge")
        return combine_cost(route.elapsed, mean_ratio, feasible, self.cfg)

    def evaluate(self, pv: PriorityVector) -> Tuple[float, Route]:
        route = self.decode(pv)
        return self.cost_of(route), route
