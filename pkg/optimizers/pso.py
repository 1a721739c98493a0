from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np
import numpy.typing as npt

from optimizers.base import Optimizer, PlanResult, SearchOutcome, initial_population
from optimizers.config import PsoConfig
from planning.codec import PriorityVector, Route, clamp
from planning.evaluation import CostConfig, RouteEvaluator
from planning.network import OperationNetwork


logger = logging.getLogger(__name__)


@dataclass
class Particle:
    position: PriorityVector
    velocity: npt.NDArray[np.float64]
    best_position: PriorityVector
    best_cost: float


@dataclass
class SwarmState:
    """Struct-of-arrays swarm; row ``i`` of every matrix is particle ``i``."""

    positions: npt.NDArray[np.float64]
    velocities: npt.NDArray[np.float64]
    best_positions: npt.NDArray[np.float64]
    best_costs: npt.NDArray[np.float64]
    global_best: PriorityVector
    global_best_cost: float
    global_best_route: Route
    iteration: int = 0
    history: List[float] = field(default_factory=list)

    def particle(self, i: int) -> Particle:
        return Particle(
            self.positions[i].copy(),
            self.velocities[i].copy(),
            self.best_positions[i].copy(),
            float(self.best_costs[i]),
        )

    @property
    def particles(self) -> List[Particle]:
        return [self.particle(i) for i in range(len(self.positions))]


def inertia_at(cfg: PsoConfig, iteration: int) -> float:
    if not 0 <= iteration < cfg.iterations:
        raise ValueError(f"iteration {iteration} outside [0, {cfg.iterations})")
    if cfg.iterations == 1:
        return cfg.inertia_start
    frac = iteration / (cfg.iterations - 1)
    return cfg.inertia_start + (cfg.inertia_end - cfg.inertia_start) * frac


def pso_init(
    cfg: PsoConfig,
    evaluator: RouteEvaluator,
    rng: np.random.Generator,
    seeds: Sequence[Sequence[float]] | None = None,
) -> SwarmState:
    positions = initial_population(cfg.particles, evaluator.size, rng, seeds)
    velocities = rng.uniform(-cfg.v_max, cfg.v_max, size=positions.shape)

    costs = np.empty(cfg.particles)
    routes: List[Route] = []
    for i, x in enumerate(positions):
        costs[i], route = evaluator.evaluate(x)
        routes.append(route)

    g = int(np.argmin(costs))
    return SwarmState(
        positions=positions,
        velocities=velocities,
        best_positions=positions.copy(),
        best_costs=costs,
        global_best=positions[g].copy(),
        global_best_cost=float(costs[g]),
        global_best_route=routes[g],
    )


def pso_step(
    state: SwarmState,
    cfg: PsoConfig,
    evaluator: RouteEvaluator,
    rng: np.random.Generator,
) -> SwarmState:
    """
    One synchronous swarm update. r1 and r2 are scalars per particle,
    shared by all of its components; every draw happens before evaluation.
    """
    w = inertia_at(cfg, state.iteration)
    r = rng.random((len(state.positions), 2))
    x = state.positions

    v = (
        w * state.velocities
        + cfg.c1 * r[:, 0:1] * (state.best_positions - x)
        + cfg.c2 * r[:, 1:2] * (state.global_best - x)
    )
    state.velocities = np.clip(v, -cfg.v_max, cfg.v_max)
    state.positions = clamp(x + state.velocities)

    for i, xi in enumerate(state.positions):
        cost, route = evaluator.evaluate(xi)
        if cost < state.best_costs[i]:
            state.best_costs[i] = cost
            state.best_positions[i] = xi
            if cost < state.global_best_cost:
                state.global_best_cost = cost
                state.global_best = xi.copy()
                state.global_best_route = route

    state.iteration += 1
    state.history.append(state.global_best_cost)
    logger.debug("PSO iteration %d: best cost %.6f", state.iteration, state.global_best_cost)
    return state


class PsoOptimizer(Optimizer):
    def __init__(self, cfg: PsoConfig | None = None):
        super().__init__(name="pso", cfg=cfg or PsoConfig())

    def search(self, evaluator, rng, seeds) -> SearchOutcome:
        state = pso_init(self.cfg, evaluator, rng, seeds)
        for _ in range(self.cfg.iterations):
            pso_step(state, self.cfg, evaluator, rng)
        return SearchOutcome(
            vector=state.global_best.copy(),
            route=state.global_best_route,
            cost=state.global_best_cost,
            history=list(state.history),
        )


def pso_optimize(
    cfg: PsoConfig,
    network: OperationNetwork,
    cost_cfg: CostConfig,
    rng: np.random.Generator,
    seeds: Sequence[Sequence[float]] | None = None,
    start_id: int | None = None,
) -> PlanResult:
    return PsoOptimizer(cfg).plan(network, cost_cfg, rng, seeds=seeds, start_id=start_id)
