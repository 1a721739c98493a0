from __future__ import annotations

import logging
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Iterable, List, Sequence

import numpy as np

from planning.codec import PRIORITY_HIGH, PRIORITY_LOW, PriorityVector, Route, clamp
from planning.errors import CodecError
from planning.evaluation import CostConfig, RouteEvaluator, RouteMetrics, metrics
from planning.network import OperationNetwork


logger = logging.getLogger(__name__)


@dataclass
class SearchOutcome:
    vector: PriorityVector
    route: Route
    cost: float
    history: List[float] = field(default_factory=list)


@dataclass
class PlanResult:
    optimizer: str
    route: Route
    vector: PriorityVector
    metrics: RouteMetrics
    history: List[float]
    wall_clock_s: float

    @property
    def cost(self) -> float:
        return self.metrics.cost


def initial_population(
    count: int,
    size: int,
    rng: np.random.Generator,
    seeds: Sequence[Sequence[float]] | None = None,
) -> np.ndarray:
    """Uniform random priority vectors; ``seeds`` (clamped) take the first rows."""
    population = rng.uniform(PRIORITY_LOW, PRIORITY_HIGH, size=(count, size))
    for row, seed in enumerate(list(seeds or [])[:count]):
        if len(seed) != size:
            raise CodecError(f"seed vector has {len(seed)} entries, expected {size}")
        population[row] = clamp(seed)
    return population


class Optimizer(ABC):
    def __init__(self, name: str, cfg):
        self.name = name
        self.cfg = cfg

    def plan(
        self,
        network: OperationNetwork,
        cost_cfg: CostConfig,
        rng: np.random.Generator,
        seeds: Sequence[Sequence[float]] | None = None,
        start_id: int | None = None,
        visited: Iterable[int] = (),
    ) -> PlanResult:
        """
        Optimize a route on the network's current positions.

        The wall clock covers evaluator construction and search only.
        """
        tic = time.perf_counter()
        evaluator = RouteEvaluator(network, cost_cfg, start_id=start_id, visited=visited)
        outcome = self.search(evaluator, rng, seeds)
        wall = time.perf_counter() - tic

        result = PlanResult(
            optimizer=self.name,
            route=outcome.route,
            vector=outcome.vector,
            metrics=metrics(outcome.route, network, cost_cfg),
            history=outcome.history,
            wall_clock_s=wall,
        )
        logger.info(
            "%s plan: cost=%.6f feasible=%s nodes=%d in %.3fs",
            self.name,
            result.cost,
            result.metrics.feasible,
            len(result.route.node_sequence),
            wall,
        )
        return result

    @abstractmethod
    def search(
        self,
        evaluator: RouteEvaluator,
        rng: np.random.Generator,
        seeds: Sequence[Sequence[float]] | None,
    ) -> SearchOutcome:
        """Run the metaheuristic against a frozen evaluator and return its best solution."""
        pass
