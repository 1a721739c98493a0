"""Scenario generation: terrain, waypoints, topology, tasks and drift."""

from __future__ import annotations

import functools
import logging
from pathlib import Path

import numpy as np

from app.state.grid_state import load_gray_grid, load_terrain_grid
from experiments.config import TERRAIN_OPEN, TERRAIN_SYNTHETIC, ScenarioConfig
from planning.network import (
    OperationNetwork,
    assign_tasks,
    build_adjacency,
    make_dynamic,
    perturb_dynamic,
    rebuild_adjacency,
    sample_static_waypoints,
)
from planning.terrain import TerrainGrid, kmeans_cluster, synthetic_coastline


logger = logging.getLogger(__name__)


@functools.lru_cache(maxsize=8)
def _terrain_cached(
    source: str,
    k: int,
    max_iters: int,
    seed: int,
    cell_size_m: float | None,
    extent_x: float,
) -> TerrainGrid | None:
    if source == TERRAIN_OPEN:
        return None
    if source != TERRAIN_SYNTHETIC and Path(source).suffix.lower() == ".occ":
        return load_terrain_grid(source)

    grid = synthetic_coastline(seed=seed) if source == TERRAIN_SYNTHETIC else load_gray_grid(source)
    cell = cell_size_m if cell_size_m is not None else extent_x / grid.width
    return kmeans_cluster(grid, k=k, max_iters=max_iters, seed=seed, cell_size_m=cell)


def load_terrain(cfg: ScenarioConfig) -> TerrainGrid | None:
    """Terrain for ``cfg``; the clustered grid is cached per process."""
    return _terrain_cached(
        cfg.terrain, cfg.terrain_k, cfg.terrain_max_iters, cfg.terrain_seed, cfg.cell_size_m, cfg.extent[0]
    )


def _pick_endpoints(cfg: ScenarioConfig, base: np.ndarray) -> tuple[int, int]:
    # Default start: the south-west-most waypoint; goal: the one farthest from it.
    start = cfg.start_id if cfg.start_id is not None else int(np.argmin(base[:, 0] + base[:, 1]))
    if cfg.goal_id is not None:
        goal = cfg.goal_id
    else:
        dist = np.linalg.norm(base - base[start], axis=1)
        dist[start] = -1.0
        goal = int(np.argmax(dist))
    return start, goal


def generate_scenario(
    cfg: ScenarioConfig,
    rng: np.random.Generator,
    terrain: TerrainGrid | None = None,
    drift: bool = True,
) -> OperationNetwork:
    """
    Sample a fresh operation network.

    Static waypoints are placed on valid water, joined by kNN plus bridging
    pairs and given random tasks. A ``dynamic_fraction`` share of the
    non-endpoint waypoints becomes dynamic; with ``drift`` they take one
    drift realization and the topology is rebuilt on the drifted positions.
    """
    waypoints = sample_static_waypoints(cfg.waypoints, terrain, cfg.extent, rng)
    base = np.array([w.base.as_tuple() for w in waypoints])
    pairs = build_adjacency(base, cfg.k_neighbors)
    edges = assign_tasks(pairs, cfg.task_ranges(), rng)
    start, goal = _pick_endpoints(cfg, base)

    candidates = [i for i in range(cfg.waypoints) if i not in (start, goal)]
    count = min(len(candidates), int(round(cfg.dynamic_fraction * cfg.waypoints)))
    dynamic = sorted(int(i) for i in rng.choice(candidates, size=count, replace=False)) if count else []
    make_dynamic(waypoints, dynamic, cfg.sigma, cfg.confidence)

    network = OperationNetwork(
        waypoints=waypoints,
        edges=edges,
        start_id=start,
        goal_id=goal,
        vehicle_speed=cfg.speed,
        k_neighbors=cfg.k_neighbors,
        task_ranges=cfg.task_ranges(),
        terrain=terrain,
    )
    if drift:
        redrift(network, rng)
    logger.info(
        "Scenario: %d waypoints (%d dynamic), %d edges, start=%d goal=%d",
        len(network),
        len(dynamic),
        len(network.edges),
        start,
        goal,
    )
    return network


def redrift(network: OperationNetwork, rng: np.random.Generator) -> OperationNetwork:
    """Draw a new drift realization in place and rebuild the topology on it."""
    perturb_dynamic(network, rng)
    rebuild_adjacency(network, rng)
    return network
