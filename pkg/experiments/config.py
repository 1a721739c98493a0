"""
Experiment configuration.

Config files are TOML: flat ``key = value`` pairs under ``[section]``
headers. Sections::

    [experiment]  runs, master_seed, optimizers, mode, mission, workers
    [scenario]    terrain, waypoints, dynamic_fraction, sigma, confidence,
                  k_neighbors, *_range, speed, extent, start_id, goal_id
    [cost]        phi1, phi2, t_available, infeasible_penalty
    [pso]         particles, iterations, c1, c2, inertia_start, inertia_end, v_max
    [bbo]         habitats, kept_habitats, iterations, max_immigration,
                  max_emigration, max_mutation, s_max
    [mission]     optimizer, replan_drift_threshold, relative_threshold,
                  replan_on_adjacency_change, drift_on_visit, replan_dynamic_only

``[cost]``, ``[pso]`` and ``[bbo]`` also configure the mission planner.
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Literal, Tuple

import toml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from optimizers.config import DEFAULT_OPTIMIZERS, BboConfig, PsoConfig
from planning.errors import ConfigError
from planning.evaluation import CostConfig
from planning.network import TaskRanges
from simulation.mission import MissionConfig


TERRAIN_SYNTHETIC = "synthetic"
TERRAIN_OPEN = "open"


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    # "synthetic", "open" (no land), or a path to a GG grayscale grid.
    terrain: str = TERRAIN_SYNTHETIC
    terrain_k: int = Field(2, ge=2)
    terrain_max_iters: int = Field(100, ge=1)
    terrain_seed: int = 0
    cell_size_m: float | None = Field(None, gt=0)
    waypoints: int = Field(40, ge=2)
    dynamic_fraction: float = Field(0.25, ge=0, le=1)
    sigma: Tuple[float, float, float] = (100.0, 100.0, 10.0)
    confidence: float = Field(0.98, gt=0, lt=1)
    k_neighbors: int = Field(5, ge=1)
    priority_range: Tuple[float, float] = (1.0, 10.0)
    risk_range: Tuple[float, float] = (5.0, 100.0)
    duration_range: Tuple[float, float] = (60.0, 600.0)
    speed: float = Field(1.5, gt=0)
    extent: Tuple[float, float, float] = (5000.0, 10000.0, 1000.0)
    start_id: int | None = Field(None, ge=0)
    goal_id: int | None = Field(None, ge=0)

    @model_validator(mode="after")
    def _check(self) -> "ScenarioConfig":
        self.task_ranges()
        if any(s < 0 for s in self.sigma):
            raise ValueError("sigma components must be non-negative")
        if any(e <= 0 for e in self.extent):
            raise ValueError("extent components must be positive")
        for name in ("start_id", "goal_id"):
            value = getattr(self, name)
            if value is not None and value >= self.waypoints:
                raise ValueError(f"{name} must be < waypoints")
        if self.start_id is not None and self.start_id == self.goal_id:
            raise ValueError("start_id and goal_id must differ")
        return self

    def task_ranges(self) -> TaskRanges:
        return TaskRanges(self.priority_range, self.risk_range, self.duration_range)


class ExperimentSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    runs: int = Field(200, ge=1)
    master_seed: int = Field(2017, ge=0)
    optimizers: List[Literal["pso", "bbo"]] = Field(default_factory=lambda: list(DEFAULT_OPTIMIZERS), min_length=1)
    mode: Literal["regenerate", "fixed"] = "regenerate"
    mission: bool = False
    workers: int = Field(1, ge=1)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    scenario: ScenarioConfig = Field(default_factory=ScenarioConfig)
    cost: CostConfig = Field(default_factory=CostConfig)
    pso: PsoConfig = Field(default_factory=PsoConfig)
    bbo: BboConfig = Field(default_factory=BboConfig)
    mission: MissionConfig = Field(default_factory=MissionConfig)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return self.model_copy(update={"experiment": self.experiment.model_copy(update={"master_seed": seed})})

    def mission_for(self, optimizer: str) -> MissionConfig:
        return self.mission.model_copy(update={"optimizer": optimizer})


def parse_experiment_config(data: dict, base_dir: Path | None = None, source: str | None = None) -> ExperimentConfig:
    data = {k: dict(v) if isinstance(v, dict) else v for k, v in data.items()}
    mission = data.setdefault("mission", {})
    for shared in ("cost", "pso", "bbo"):
        mission.setdefault(shared, data.get(shared, {}))

    scenario = data.get("scenario", {})
    terrain = scenario.get("terrain", TERRAIN_SYNTHETIC)
    if terrain not in (TERRAIN_SYNTHETIC, TERRAIN_OPEN):
        path = Path(terrain)
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        if not path.exists():
            raise ConfigError(f"terrain file not found: {path}", source)
        scenario["terrain"] = str(path)

    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc), source) from exc


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config file not found", str(path))
    try:
        data = toml.load(path)
    except toml.TomlDecodeError as exc:
        raise ConfigError(f"malformed TOML ({exc})", str(path)) from exc
    return parse_experiment_config(data, base_dir=path.parent, source=str(path))
