"""
SimPy mission simulation with drift and warm-started replanning.

The model:
----------
- The vehicle flies the planned route leg by leg. A leg is timed at
  departure from the positions current at that moment and flown atomically.
- On arrival at a waypoint the dynamic waypoints may drift (sensor update).
- The network is then compared with the snapshot taken at the last plan;
  too much drift or a changed kNN topology triggers a replan from the
  current waypoint over the remaining budget, seeded with the incumbent
  priority vector.
- Before each departure a leg that cannot fit the remaining budget forces a
  replan as well.
- The mission ends at the goal, when the budget runs out, on a dead end, or
  when no feasible replan exists.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Literal, Sequence

import numpy as np
import simpy
from pydantic import BaseModel, ConfigDict, Field

from optimizers import make_optimizer
from optimizers.base import PlanResult
from optimizers.config import BboConfig, PsoConfig
from planning.codec import PriorityVector, Route
from planning.errors import MissionAbortedError, MissionFailedError, PlannerError
from planning.evaluation import CostConfig, Leg, RouteEvaluator, RouteMetrics, metrics_from_legs
from planning.network import (
    OperationNetwork,
    deformation_since,
    drift_by_node,
    edge_distance,
    edge_traversal_time,
    perturb_dynamic,
    rebuild_adjacency,
    snapshot_positions,
)


logger = logging.getLogger(__name__)

# Floating slack for the departure budget check.
_BUDGET_EPS = 1e-9


class MissionConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    optimizer: Literal["pso", "bbo"] = "pso"
    pso: PsoConfig = Field(default_factory=PsoConfig)
    bbo: BboConfig = Field(default_factory=BboConfig)
    cost: CostConfig = Field(default_factory=CostConfig)
    # None: per-node threshold of ``relative_threshold`` times the node's bound norm.
    replan_drift_threshold: float | None = Field(None, ge=0)
    relative_threshold: float = Field(0.1, ge=0)
    replan_on_adjacency_change: bool = True
    drift_on_visit: bool = True
    replan_dynamic_only: bool = False


class EventTag(str, Enum):
    DEPARTED = "Departed"
    ARRIVED = "ArrivedWaypoint"
    DRIFT = "DriftApplied"
    REPLAN_TRIGGERED = "ReplanTriggered"
    REPLANNED = "Replanned"
    ENDED = "MissionEnded"


class MissionOutcome(str, Enum):
    GOAL_REACHED = "GoalReached"
    BUDGET_EXHAUSTED = "BudgetExhausted"
    DEAD_END = "DeadEnd"
    ABORTED = "Aborted"


@dataclass
class MissionEvent:
    time: float
    tag: EventTag
    payload: Dict[str, Any] = field(default_factory=dict)

    def to_line(self) -> str:
        record = {"t": round(self.time, 6), "event": self.tag.value}
        record.update(self.payload)
        return json.dumps(record, sort_keys=False)


@dataclass
class ReplanResult:
    route: Route
    vector: PriorityVector
    metrics: RouteMetrics
    incumbent_cost: float
    wall_clock_s: float


@dataclass
class MissionLog:
    events: List[MissionEvent] = field(default_factory=list)
    initial_plan: PlanResult | None = None
    flown_nodes: List[int] = field(default_factory=list)
    legs: List[Leg] = field(default_factory=list)
    outcome: MissionOutcome | None = None
    metrics: RouteMetrics | None = None
    remaining_budget: float = 0.0
    replans: List[ReplanResult] = field(default_factory=list)

    @property
    def replan_count(self) -> int:
        return len(self.replans)

    def events_of(self, tag: EventTag) -> List[MissionEvent]:
        return [e for e in self.events if e.tag is tag]

    def to_lines(self) -> List[str]:
        return [e.to_line() for e in self.events]


def _plan(cfg: MissionConfig, network: OperationNetwork, cost: CostConfig, rng, **kwargs) -> PlanResult:
    return make_optimizer(cfg.optimizer, cfg.pso, cfg.bbo).plan(network, cost, rng, **kwargs)


def replan(
    current_waypoint: int,
    remaining_budget: float,
    network: OperationNetwork,
    cfg: MissionConfig,
    incumbent: PriorityVector,
    rng: np.random.Generator,
    visited: Sequence[int] = (),
) -> ReplanResult:
    """
    Re-optimize from ``current_waypoint`` over ``remaining_budget`` seconds.

    ``visited`` waypoints (already flown) are excluded from the new route.
    Raises ``MissionAbortedError`` when no budget is left or no feasible
    route exists.
    """
    if remaining_budget <= 0:
        raise MissionAbortedError("no time budget left to replan")

    cost = cfg.cost.model_copy(update={"t_available": remaining_budget})
    blocked = [v for v in visited if v != current_waypoint]
    incumbent_cost, _ = RouteEvaluator(network, cost, start_id=current_waypoint, visited=blocked).evaluate(incumbent)

    result = _plan(cfg, network, cost, rng, seeds=[incumbent], start_id=current_waypoint, visited=blocked)
    if not result.metrics.feasible:
        raise MissionAbortedError(
            f"no feasible route from waypoint {current_waypoint} within {remaining_budget:.3f} s"
        )
    return ReplanResult(result.route, result.vector, result.metrics, incumbent_cost, result.wall_clock_s)


def _time_to_goal_bound(network: OperationNetwork, node: int) -> float:
    a = network.waypoints[node].current.as_array()
    b = network.waypoints[network.goal_id].current.as_array()
    return float(np.linalg.norm(a - b)) / network.vehicle_speed


def _replan_reason(
    network: OperationNetwork,
    reference: np.ndarray,
    cfg: MissionConfig,
    adjacency_changed: bool,
) -> str | None:
    max_drift, _ = deformation_since(network, reference)
    if cfg.replan_drift_threshold is not None:
        if max_drift > cfg.replan_drift_threshold:
            return "drift"
    else:
        drift = drift_by_node(network, reference)
        for wid in network.dynamic_ids():
            limit = cfg.relative_threshold * float(np.linalg.norm(network.waypoints[wid].bound.as_array()))
            if drift[wid] > limit:
                return "drift"
    if adjacency_changed and cfg.replan_on_adjacency_change:
        return "adjacency"
    return None


def run_mission(
    network: OperationNetwork,
    cfg: MissionConfig,
    rng: np.random.Generator,
    perturb: Callable[[OperationNetwork, np.random.Generator], Dict[int, float]] = perturb_dynamic,
) -> MissionLog:
    """
    Fly a mission on ``network`` (mutated in place by drift and rebuilds).

    ``perturb`` is the sensor-update model applied on arrival.
    """
    budget = cfg.cost.t_available
    goal = network.goal_id
    log = MissionLog(flown_nodes=[network.start_id])
    env = simpy.Environment()

    def record(tag: EventTag, **payload) -> None:
        log.events.append(MissionEvent(env.now, tag, payload))

    def finish(outcome: MissionOutcome, reason: str = "") -> None:
        log.outcome = outcome
        record(EventTag.ENDED, outcome=outcome.value, reason=reason)

    def mission_process(env: simpy.Environment):
        plan = _plan(cfg, network, cfg.cost, rng)
        log.initial_plan = plan
        if not plan.metrics.feasible:
            finish(MissionOutcome.ABORTED, "no feasible initial route")
            return

        incumbent = plan.vector
        route = list(plan.route.node_sequence)
        step = 0
        current = network.start_id
        reference = snapshot_positions(network)

        def try_replan(reason: str) -> bool:
            nonlocal incumbent, route, step, reference
            record(EventTag.REPLAN_TRIGGERED, reason=reason, waypoint=current)
            rebuild_adjacency(network, rng)
            try:
                result = replan(current, budget - env.now, network, cfg, incumbent, rng, log.flown_nodes)
            except MissionAbortedError as exc:
                logger.info("Replan at waypoint %d failed: %s", current, exc)
                return False
            record(
                EventTag.REPLANNED,
                old_route=route[step:],
                new_route=list(result.route.node_sequence),
                incumbent_cost=round(result.incumbent_cost, 6),
                new_cost=round(result.metrics.cost, 6),
                wall_clock_s=round(result.wall_clock_s, 6),
            )
            log.replans.append(result)
            incumbent = result.vector
            route = list(result.route.node_sequence)
            step = 0
            reference = snapshot_positions(network)
            return True

        while current != goal:
            if step + 1 >= len(route):
                finish(MissionOutcome.DEAD_END, "planned route ended before the goal")
                return
            nxt = route[step + 1]
            if not network.has_edge(current, nxt):
                if not try_replan("adjacency"):
                    finish(MissionOutcome.ABORTED, "planned edge dropped from the network")
                    return
                continue
            leg_time = edge_traversal_time(network, current, nxt)
            lower_bound = _time_to_goal_bound(network, nxt)
            if env.now + leg_time + lower_bound > budget + _BUDGET_EPS:
                if not try_replan("budget"):
                    finish(MissionOutcome.BUDGET_EXHAUSTED, "remaining legs exceed the budget")
                    return
                continue

            edge_idx = network.edge_index(current, nxt)
            task = network.edges[edge_idx].task
            leg = Leg(
                edge=edge_idx,
                distance=edge_distance(network, current, nxt),
                time=leg_time,
                priority=task.priority,
                risk=task.risk,
            )
            record(EventTag.DEPARTED, origin=current, target=nxt, leg_time_s=round(leg_time, 6))
            yield env.timeout(leg_time)

            log.legs.append(leg)
            log.flown_nodes.append(nxt)
            current = nxt
            step += 1
            record(EventTag.ARRIVED, waypoint=current)
            if current == goal:
                break

            if cfg.drift_on_visit:
                summary = perturb(network, rng)
                if summary:
                    record(EventTag.DRIFT, max_drift_m=round(max(summary.values()), 6), nodes=len(summary))

            if cfg.replan_dynamic_only and not network.waypoints[current].is_dynamic:
                continue
            # Flown edges use the topology of the last deformation check.
            topology_changed = rebuild_adjacency(network, rng)
            reason = _replan_reason(network, reference, cfg, topology_changed)
            if reason is not None and not try_replan(reason):
                finish(MissionOutcome.ABORTED, "no feasible replan")
                return

        finish(MissionOutcome.GOAL_REACHED)

    env.process(mission_process(env))
    try:
        env.run()
    except PlannerError as exc:
        log.outcome = MissionOutcome.ABORTED
        raise MissionFailedError(str(exc), log=log) from exc
    finally:
        log.remaining_budget = budget - env.now
        log.metrics = metrics_from_legs(log.legs, log.outcome is MissionOutcome.GOAL_REACHED, cfg.cost)

    logger.info(
        "Mission ended: %s after %.1f s, %d legs, %d replans",
        log.outcome.value if log.outcome else "unknown",
        env.now,
        len(log.legs),
        log.replan_count,
    )
    return log
