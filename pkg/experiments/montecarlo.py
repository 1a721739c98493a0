"""
Seeded Monte Carlo campaigns.

Every run gets its own child generators from
``SeedSequence(master_seed, spawn_key=(run, stream))``. The scenario
stream builds the run's network once; every optimizer then plans on that
same realization with its own stream, so adding or removing an optimizer
never changes what the others see.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Dict, Iterable, List

import numpy as np
from tqdm import tqdm

from experiments.config import ExperimentConfig
from experiments.records import RunRecord, Summary, summary_from_records
from experiments.scenario import generate_scenario, load_terrain, redrift
from optimizers import make_optimizer
from planning.errors import PlannerError
from simulation.mission import run_mission


logger = logging.getLogger(__name__)

STREAM_SCENARIO = 0
STREAM_OPTIMIZER = {"pso": 1, "bbo": 2}
STREAM_MISSION = 3
# Spawn key of the shared base scenario in fixed mode; never collides with a run index.
FIXED_SCENARIO_KEY = (2**32 - 1,)


@dataclass
class RunOutcome:
    records: List[RunRecord]
    histories: Dict[str, List[float]] = field(default_factory=dict)


@dataclass
class CampaignResult:
    records: List[RunRecord]
    summary: Summary
    # Best-cost histories of the last run, per optimizer.
    histories: Dict[str, List[float]] = field(default_factory=dict)

    def __iter__(self):
        yield self.records
        yield self.summary


def child_rng(master_seed: int, run: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(run, stream)))


def is_monotone(history: Iterable[float]) -> bool:
    values = list(history)
    return all(b <= a for a, b in zip(values, values[1:]))


def _scenario_for_run(cfg: ExperimentConfig, run: int, terrain):
    seed = cfg.experiment.master_seed
    if cfg.experiment.mode == "fixed":
        base_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=FIXED_SCENARIO_KEY))
        network = generate_scenario(cfg.scenario, base_rng, terrain, drift=False)
        return redrift(network, child_rng(seed, run, STREAM_SCENARIO))
    return generate_scenario(cfg.scenario, child_rng(seed, run, STREAM_SCENARIO), terrain)


def execute_run(cfg: ExperimentConfig, run: int) -> RunOutcome:
    """One Monte Carlo run: one scenario, every selected optimizer on it."""
    seed = cfg.experiment.master_seed
    optimizers = cfg.experiment.optimizers
    try:
        network = _scenario_for_run(cfg, run, load_terrain(cfg.scenario))
    except PlannerError as exc:
        logger.warning("Run %d: scenario generation failed: %s", run, exc)
        return RunOutcome([RunRecord.failed(run, tag, str(exc)) for tag in optimizers])

    outcome = RunOutcome([])
    for tag in optimizers:
        rng = child_rng(seed, run, STREAM_OPTIMIZER[tag])
        try:
            if cfg.experiment.mission:
                log = run_mission(network.copy(), cfg.mission_for(tag), rng)
                plan = log.initial_plan
                wall = plan.wall_clock_s + sum(r.wall_clock_s for r in log.replans)
                record = RunRecord.from_metrics(
                    run, tag, log.metrics, wall, log.replan_count, is_monotone(plan.history)
                )
                history = plan.history
            else:
                plan = make_optimizer(tag, cfg.pso, cfg.bbo).plan(network, cfg.cost, rng)
                record = RunRecord.from_metrics(
                    run, tag, plan.metrics, plan.wall_clock_s, monotone=is_monotone(plan.history)
                )
                history = plan.history
        except PlannerError as exc:
            logger.warning("Run %d (%s) failed: %s", run, tag, exc)
            outcome.records.append(RunRecord.failed(run, tag, str(exc)))
            continue
        if not record.monotone:
            logger.warning("Run %d (%s): best-cost history increased", run, tag)
        outcome.records.append(record)
        outcome.histories[tag] = list(history)
    return outcome


def run_monte_carlo(cfg: ExperimentConfig, progress: bool = False) -> CampaignResult:
    """
    Run ``cfg.experiment.runs`` seeded runs and aggregate them.

    The result unpacks as ``records, summary``; the last run's convergence
    histories ride along in ``histories``.
    """
    runs = range(cfg.experiment.runs)
    workers = cfg.experiment.workers
    task = partial(execute_run, cfg)

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            iterator = pool.map(task, runs)
            outcomes = list(tqdm(iterator, total=len(runs), desc="montecarlo", disable=not progress))
    else:
        outcomes = [task(i) for i in tqdm(runs, desc="montecarlo", disable=not progress)]

    records = [r for o in outcomes for r in o.records]
    failed = sum(r.status != "ok" for r in records)
    logger.info("Campaign finished: %d runs, %d records, %d failed", len(runs), len(records), failed)
    return CampaignResult(
        records=records,
        summary=summary_from_records(records, cfg.cost.t_available),
        histories=outcomes[-1].histories if outcomes else {},
    )
