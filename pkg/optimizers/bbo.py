"""
Biogeography-based optimization over priority vectors.

Habitats are kept sorted best-first. Species count comes from rank (best
habitat holds ``s_max`` species, worst holds 1), migration rates are linear
in species count, and one shared species-count probability vector is
stepped once per generation to scale mutation. The ``kept_habitats`` best
habitats are never migrated into or mutated.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from optimizers.base import Optimizer, PlanResult, SearchOutcome, initial_population
from optimizers.config import BboConfig
from planning.codec import PRIORITY_HIGH, PRIORITY_LOW, PriorityVector, Route, clamp
from planning.errors import DegenerateProbabilityError
from planning.evaluation import CostConfig, RouteEvaluator
from planning.network import OperationNetwork


logger = logging.getLogger(__name__)


@dataclass
class Habitat:
    siv: PriorityVector
    hsi: float
    route: Route
    species_count: int = 0
    lambda_: float = 0.0
    mu: float = 0.0
    p_s: float = 0.0


@dataclass
class EcosystemState:
    habitats: List[Habitat]
    probabilities: npt.NDArray[np.float64]  # indexed by species count 0..s_max
    best_vector: PriorityVector
    best_route: Route
    best_cost: float
    iteration: int = 0
    history: List[float] = field(default_factory=list)


def migration_rates(species: int, cfg: BboConfig) -> Tuple[float, float]:
    s_max = cfg.species_max
    if not 0 <= species <= s_max:
        raise ValueError(f"species count {species} outside [0, {s_max}]")
    ratio = species / s_max
    return cfg.max_immigration * (1.0 - ratio), cfg.max_emigration * ratio


def rate_table(cfg: BboConfig) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    rates = [migration_rates(s, cfg) for s in range(cfg.species_max + 1)]
    return np.array([r[0] for r in rates]), np.array([r[1] for r in rates])


def species_prob_step(
    p: npt.ArrayLike,
    lam: npt.ArrayLike,
    mu: npt.ArrayLike,
) -> npt.NDArray[np.float64]:
    """One step of the species-count probability recursion, clamped and renormalized."""
    p = np.asarray(p, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)

    nxt = p * (1.0 - lam - mu)
    nxt[1:] += p[:-1] * lam[:-1]
    nxt[:-1] += p[1:] * mu[1:]
    nxt = np.clip(nxt, 0.0, None)
    total = nxt.sum()
    if total <= 0:
        raise DegenerateProbabilityError("species-count probabilities collapsed to zero")
    return nxt / total


def mutation_rate(p_s: float, p_max: float, cfg: BboConfig) -> float:
    if p_max <= 0:
        raise DegenerateProbabilityError("maximum species-count probability is zero")
    return float(min(1.0, max(0.0, cfg.max_mutation * (1.0 - p_s) / p_max)))


def _species_by_rank(rank: int, count: int, s_max: int) -> int:
    if count == 1:
        return s_max
    return int(round(s_max - (s_max - 1) * rank / (count - 1)))


def assign_species(state: EcosystemState, cfg: BboConfig) -> None:
    """Rank-derived species counts and their migration rates, best habitat first."""
    n = len(state.habitats)
    for rank, h in enumerate(state.habitats):
        h.species_count = _species_by_rank(rank, n, cfg.species_max)
        h.lambda_, h.mu = migration_rates(h.species_count, cfg)
        h.p_s = float(state.probabilities[h.species_count])


def _sort(habitats: List[Habitat]) -> List[Habitat]:
    # Stable: on equal HSI the incumbent order (elites first) is kept.
    return sorted(habitats, key=lambda h: h.hsi)


def bbo_init(
    cfg: BboConfig,
    evaluator: RouteEvaluator,
    rng: np.random.Generator,
    seeds: Sequence[Sequence[float]] | None = None,
) -> EcosystemState:
    population = initial_population(cfg.habitats, evaluator.size, rng, seeds)
    habitats = []
    for siv in population:
        cost, route = evaluator.evaluate(siv)
        habitats.append(Habitat(siv=siv.copy(), hsi=cost, route=route))
    habitats = _sort(habitats)

    s_max = cfg.species_max
    state = EcosystemState(
        habitats=habitats,
        probabilities=np.full(s_max + 1, 1.0 / (s_max + 1)),
        best_vector=habitats[0].siv.copy(),
        best_route=habitats[0].route,
        best_cost=habitats[0].hsi,
    )
    assign_species(state, cfg)
    return state


def migrate(state: EcosystemState, cfg: BboConfig, rng: np.random.Generator) -> None:
    """
    Per-SIV immigration into every non-elite habitat. Sources are drawn by
    roulette over the other habitats' emigration rates and donate the value
    they held before this migration round.
    """
    habitats = state.habitats
    count = len(habitats)
    donors = np.array([h.siv for h in habitats])
    mus = np.array([h.mu for h in habitats])

    for idx in range(cfg.kept_habitats, count):
        h = habitats[idx]
        immigrate = rng.random(donors.shape[1]) < h.lambda_
        k = int(immigrate.sum())
        if k == 0:
            continue
        weights = mus.copy()
        weights[idx] = 0.0
        total = weights.sum()
        if total <= 0:
            continue
        cumulative = np.cumsum(weights)
        sources = np.searchsorted(cumulative, rng.random(k) * total, side="right")
        sources = np.minimum(sources, count - 1)

        siv = h.siv.copy()
        siv[immigrate] = donors[sources, np.flatnonzero(immigrate)]
        h.siv = clamp(siv)


def mutate(
    state: EcosystemState,
    p: npt.ArrayLike,
    cfg: BboConfig,
    rng: np.random.Generator,
) -> None:
    p = np.asarray(p, dtype=np.float64)
    p_max = float(p.max())
    for h in state.habitats[cfg.kept_habitats:]:
        m = mutation_rate(float(p[h.species_count]), p_max, cfg)
        hit = rng.random(len(h.siv)) < m
        if hit.any():
            siv = h.siv.copy()
            siv[hit] = rng.uniform(PRIORITY_LOW, PRIORITY_HIGH, size=int(hit.sum()))
            h.siv = siv


def bbo_generation(
    state: EcosystemState,
    cfg: BboConfig,
    evaluator: RouteEvaluator,
    rng: np.random.Generator,
) -> EcosystemState:
    assign_species(state, cfg)
    lam, mu = rate_table(cfg)
    state.probabilities = species_prob_step(state.probabilities, lam, mu)

    migrate(state, cfg, rng)
    mutate(state, state.probabilities, cfg, rng)

    for h in state.habitats[cfg.kept_habitats:]:
        h.hsi, h.route = evaluator.evaluate(h.siv)
    state.habitats = _sort(state.habitats)
    assign_species(state, cfg)

    lead = state.habitats[0]
    if lead.hsi < state.best_cost:
        state.best_cost = lead.hsi
        state.best_vector = lead.siv.copy()
        state.best_route = lead.route

    state.iteration += 1
    state.history.append(state.best_cost)
    logger.debug("BBO generation %d: best cost %.6f", state.iteration, state.best_cost)
    return state


class BboOptimizer(Optimizer):
    def __init__(self, cfg: BboConfig | None = None):
        super().__init__(name="bbo", cfg=cfg or BboConfig())

    def search(self, evaluator, rng, seeds) -> SearchOutcome:
        state = bbo_init(self.cfg, evaluator, rng, seeds)
        for _ in range(self.cfg.iterations):
            bbo_generation(state, self.cfg, evaluator, rng)
        return SearchOutcome(
            vector=state.best_vector.copy(),
            route=state.best_route,
            cost=state.best_cost,
            history=list(state.history),
        )


def bbo_optimize(
    cfg: BboConfig,
    network: OperationNetwork,
    cost_cfg: CostConfig,
    rng: np.random.Generator,
    seeds: Sequence[Sequence[float]] | None = None,
    start_id: int | None = None,
) -> PlanResult:
    return BboOptimizer(cfg).plan(network, cost_cfg, rng, seeds=seeds, start_id=start_id)
