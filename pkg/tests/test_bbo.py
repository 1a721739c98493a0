import numpy as np
import pytest
from pydantic import ValidationError

from optimizers.bbo import (
    assign_species,
    bbo_generation,
    bbo_init,
    bbo_optimize,
    migrate,
    migration_rates,
    mutate,
    mutation_rate,
    rate_table,
    species_prob_step,
)
from optimizers.config import BboConfig
from planning.codec import PRIORITY_HIGH, PRIORITY_LOW
from planning.errors import DegenerateProbabilityError
from planning.evaluation import CostConfig, RouteEvaluator

from conftest import oracle_optimum, random_network

SMALL = BboConfig(habitats=12, kept_habitats=3, iterations=20)


def test_published_defaults():
    cfg = BboConfig()
    assert (cfg.habitats, cfg.kept_habitats, cfg.iterations, cfg.max_mutation) == (50, 10, 150, 0.1)
    assert cfg.species_max == 50


def test_config_validation():
    with pytest.raises(ValidationError):
        BboConfig(habitats=5, kept_habitats=5)
    with pytest.raises(ValidationError):
        BboConfig(max_mutation=1.5)


def test_rates_are_complementary():
    cfg = BboConfig()
    for s in range(cfg.species_max + 1):
        lam, mu = migration_rates(s, cfg)
        assert abs(lam + mu - 1.0) <= 1e-12
    assert migration_rates(0, cfg) == (1.0, 0.0)
    assert migration_rates(cfg.species_max, cfg) == (0.0, 1.0)
    with pytest.raises(ValueError):
        migration_rates(cfg.species_max + 1, cfg)


def test_probability_step_stays_a_distribution():
    cfg = BboConfig(habitats=10, kept_habitats=2)
    lam, mu = rate_table(cfg)
    p = np.full(cfg.species_max + 1, 1.0 / (cfg.species_max + 1))
    for _ in range(50):
        p = species_prob_step(p, lam, mu)
        assert np.all(p >= 0.0)
        assert p.sum() == pytest.approx(1.0)
    with pytest.raises(DegenerateProbabilityError):
        species_prob_step(np.zeros(3), np.zeros(3), np.zeros(3))


def test_mutation_rate_scaling():
    cfg = BboConfig(max_mutation=0.1)
    assert mutation_rate(1.0, 1.0, cfg) == 0.0
    assert mutation_rate(0.5, 0.5, cfg) == pytest.approx(0.1)
    assert mutation_rate(0.0, 0.2, cfg) == pytest.approx(0.5)
    assert mutation_rate(0.0, 0.01, BboConfig(max_mutation=1.0)) == 1.0
    with pytest.raises(DegenerateProbabilityError):
        mutation_rate(0.0, 0.0, cfg)


def test_species_follow_rank():
    network = random_network(4, count=10)
    evaluator = RouteEvaluator(network, CostConfig(t_available=5000.0))
    state = bbo_init(SMALL, evaluator, np.random.default_rng(0))
    assign_species(state, SMALL)
    counts = [h.species_count for h in state.habitats]
    assert counts[0] == SMALL.species_max and counts[-1] == 1
    assert all(b <= a for a, b in zip(counts, counts[1:]))
    costs = [h.hsi for h in state.habitats]
    assert costs == sorted(costs)


def test_elites_survive_a_generation():
    network = random_network(5, count=10)
    evaluator = RouteEvaluator(network, CostConfig(t_available=5000.0))
    rng = np.random.default_rng(1)
    state = bbo_init(SMALL, evaluator, rng)
    elites = [h.siv.copy() for h in state.habitats[: SMALL.kept_habitats]]
    bbo_generation(state, SMALL, evaluator, rng)
    for siv in elites:
        assert any(np.array_equal(siv, h.siv) for h in state.habitats)
    assert state.best_cost <= min(h.hsi for h in state.habitats) + 1e-12


def test_history_monotone_and_deterministic():
    network = random_network(6, count=12)
    cost = CostConfig(t_available=6000.0)
    a = bbo_optimize(SMALL, network, cost, np.random.default_rng(7))
    b = bbo_optimize(SMALL, network, cost, np.random.default_rng(7))
    assert len(a.history) == SMALL.iterations
    assert all(y <= x for x, y in zip(a.history, a.history[1:]))
    assert a.history == b.history
    assert np.array_equal(a.vector, b.vector)


def oracle_hit_rate(seeds, cfg):
    hits = scored = 0
    for seed in seeds:
        network = random_network(seed, count=8, k_neighbors=3)
        cost = CostConfig(t_available=4000.0)
        best = oracle_optimum(network, cost)
        if best is None:
            continue
        scored += 1
        result = bbo_optimize(cfg, network, cost, np.random.default_rng(seed))
        assert result.cost >= best[0] - 1e-9
        hits += result.cost <= best[0] * 1.05
    return hits, scored


def test_close_to_exhaustive_optimum():
    hits, scored = oracle_hit_rate(range(10), BboConfig())
    assert scored >= 5
    assert hits >= 0.8 * scored


@pytest.mark.slow
def test_close_to_exhaustive_optimum_fifty_seeds():
    hits, scored = oracle_hit_rate(range(50), BboConfig())
    assert hits >= 0.9 * scored


def test_two_level_species_distribution_is_stationary():
    lam, mu = rate_table(BboConfig(habitats=2, kept_habitats=1, s_max=1))
    assert lam.tolist() == [1.0, 0.0] and mu.tolist() == [0.0, 1.0]
    assert species_prob_step([0.5, 0.5], lam, mu).tolist() == [0.5, 0.5]


def test_full_immigration_copies_the_only_donor():
    cfg = BboConfig(habitats=2, kept_habitats=1)
    evaluator = RouteEvaluator(random_network(7, count=10), CostConfig(t_available=5000.0))
    state = bbo_init(cfg, evaluator, np.random.default_rng(3))
    best, worst = state.habitats
    assert best.mu > 0.0
    worst.lambda_ = 1.0
    best_siv = best.siv.copy()
    migrate(state, cfg, np.random.default_rng(4))
    assert np.array_equal(worst.siv, best_siv)
    assert np.array_equal(best.siv, best_siv)


def non_elite_sivs(state, cfg):
    return [h.siv.copy() for h in state.habitats[cfg.kept_habitats:]]


def test_zero_mutation_changes_nothing():
    cfg = SMALL.model_copy(update={"max_mutation": 0.0})
    evaluator = RouteEvaluator(random_network(8, count=10), CostConfig(t_available=5000.0))
    state = bbo_init(cfg, evaluator, np.random.default_rng(0))
    before = [h.siv.copy() for h in state.habitats]
    mutate(state, state.probabilities, cfg, np.random.default_rng(1))
    assert all(np.array_equal(a, h.siv) for a, h in zip(before, state.habitats))


def test_certain_mutation_redraws_every_non_elite_component():
    cfg = SMALL.model_copy(update={"max_mutation": 1.0})
    evaluator = RouteEvaluator(random_network(8, count=10), CostConfig(t_available=5000.0))
    state = bbo_init(cfg, evaluator, np.random.default_rng(0))
    elites = [h.siv.copy() for h in state.habitats[: cfg.kept_habitats]]
    before = non_elite_sivs(state, cfg)
    # Uniform probabilities put every habitat at the mutation ceiling.
    mutate(state, state.probabilities, cfg, np.random.default_rng(1))
    for old, new in zip(before, non_elite_sivs(state, cfg)):
        assert np.all(old != new)
    for old, h in zip(elites, state.habitats):
        assert np.array_equal(old, h.siv)


def test_operators_keep_sivs_in_range():
    cfg = SMALL.model_copy(update={"max_mutation": 1.0})
    evaluator = RouteEvaluator(random_network(9, count=10), CostConfig(t_available=5000.0))
    rng = np.random.default_rng(2)
    state = bbo_init(cfg, evaluator, rng)
    for _ in range(5):
        assign_species(state, cfg)
        migrate(state, cfg, rng)
        for h in state.habitats:
            assert np.all((h.siv >= PRIORITY_LOW) & (h.siv <= PRIORITY_HIGH))
        mutate(state, state.probabilities, cfg, rng)
        for h in state.habitats:
            assert np.all((h.siv >= PRIORITY_LOW) & (h.siv <= PRIORITY_HIGH))
