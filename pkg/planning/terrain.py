"""
Grayscale map ingestion and water/land classification.

A ``GrayGrid`` holds raw intensities, a ``TerrainGrid`` holds the clustered
Valid (water) / Forbidden (land) occupancy. World coordinates put the origin
at the corner of cell (row 0, col 0); ``x`` runs along columns and ``y``
along rows, both in meters.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import List

import numpy as np
import numpy.typing as npt

from planning.errors import DegenerateClusterError, IntensityRangeError, InvalidTerrainError


logger = logging.getLogger(__name__)


class CellState(IntEnum):
    FORBIDDEN = 0
    VALID = 1


@dataclass(frozen=True)
class GrayGrid:
    width: int
    height: int
    max_value: int
    cells: npt.NDArray[np.int64]  # shape (height, width)

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.int64).reshape(self.height, self.width)
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        if cells.size and (cells.min() < 0 or cells.max() > self.max_value):
            raise IntensityRangeError("intensity outside [0, max_value]")


@dataclass(frozen=True)
class TerrainGrid:
    width: int
    height: int
    cell_size_m: float
    occupancy: npt.NDArray[np.uint8]  # shape (height, width), CellState values

    def __post_init__(self):
        if not self.cell_size_m > 0:
            raise InvalidTerrainError("cell_size_m must be positive")
        occ = np.asarray(self.occupancy, dtype=np.uint8).reshape(self.height, self.width)
        occ.setflags(write=False)
        object.__setattr__(self, "occupancy", occ)

    @property
    def extent_m(self) -> tuple[float, float]:
        return self.width * self.cell_size_m, self.height * self.cell_size_m

    @property
    def valid_cells(self) -> int:
        return int(np.count_nonzero(self.occupancy == CellState.VALID))

    @classmethod
    def all_valid(cls, width: int, height: int, cell_size_m: float) -> "TerrainGrid":
        return cls(width, height, cell_size_m, np.full((height, width), CellState.VALID, dtype=np.uint8))


@dataclass
class KMeansResult:
    """Lloyd's iteration on the distinct intensities of a grid."""

    values: npt.NDArray[np.float64]
    labels: npt.NDArray[np.int64]
    centroids: npt.NDArray[np.float64]
    objectives: List[float] = field(default_factory=list)
    iterations: int = 0


def _objective(values, counts, labels, centroids) -> float:
    return float(np.sum(counts * (values - centroids[labels]) ** 2))


def lloyd_1d(
    values: npt.ArrayLike,
    counts: npt.ArrayLike,
    k: int,
    max_iters: int,
    rng: np.random.Generator,
) -> KMeansResult:
    """
    Weighted 1-D k-means over distinct ``values`` occurring ``counts`` times.

    Centroids start at ``k`` distinct values drawn without replacement.
    Nearest-centroid ties go to the lower centroid index. A cluster that
    empties out takes the value lying farthest from its own centroid.
    """
    values = np.asarray(values, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.float64)
    if k > len(values):
        raise DegenerateClusterError(
            f"k={k} exceeds the {len(values)} distinct intensities in the grid"
        )
    if k < 1:
        raise InvalidTerrainError("k must be >= 1")
    if max_iters < 1:
        raise InvalidTerrainError("max_iters must be >= 1")

    centroids = rng.choice(values, size=k, replace=False).astype(np.float64)
    labels: npt.NDArray[np.int64] | None = None
    result = KMeansResult(values=values, labels=np.zeros(len(values), dtype=np.int64), centroids=centroids)

    for it in range(max_iters):
        dist = np.abs(values[:, None] - centroids[None, :])
        new_labels = np.argmin(dist, axis=1)

        for c in range(k):
            if not np.any(new_labels == c):
                own = dist[np.arange(len(values)), new_labels]
                far = int(np.argmax(own))
                centroids[c] = values[far]
                new_labels[far] = c
                dist[:, c] = np.abs(values - centroids[c])

        result.iterations = it + 1
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels

        for c in range(k):
            members = labels == c
            centroids[c] = np.average(values[members], weights=counts[members])
        result.objectives.append(_objective(values, counts, labels, centroids))

    result.labels = labels if labels is not None else new_labels
    result.centroids = centroids
    return result


def kmeans_cluster(
    grid: GrayGrid,
    k: int = 2,
    max_iters: int = 100,
    seed: int = 0,
    cell_size_m: float = 10.0,
) -> TerrainGrid:
    """
    Cluster a grayscale grid into Valid (brightest cluster) and Forbidden cells.

    For ``k > 2`` only the brightest cluster is water; every other cluster is
    treated as land.
    """
    values, inverse, counts = np.unique(grid.cells.ravel(), return_inverse=True, return_counts=True)
    result = lloyd_1d(values, counts, k, max_iters, np.random.default_rng(seed))

    bright = int(np.argmax(result.centroids))
    cell_labels = result.labels[inverse].reshape(grid.height, grid.width)
    occupancy = np.where(cell_labels == bright, CellState.VALID, CellState.FORBIDDEN).astype(np.uint8)

    logger.info(
        "Clustered %dx%d grid in %d iterations, centroids=%s, water cells=%d",
        grid.width,
        grid.height,
        result.iterations,
        np.round(np.sort(result.centroids), 3).tolist(),
        int(np.count_nonzero(occupancy)),
    )
    return TerrainGrid(grid.width, grid.height, cell_size_m, occupancy)


def is_valid_position(terrain: TerrainGrid, x: float, y: float) -> bool:
    if not (math.isfinite(x) and math.isfinite(y)):
        return False
    col = math.floor(x / terrain.cell_size_m)
    row = math.floor(y / terrain.cell_size_m)
    if not (0 <= col < terrain.width and 0 <= row < terrain.height):
        return False
    return bool(terrain.occupancy[row, col] == CellState.VALID)


def synthetic_coastline(width: int = 50, height: int = 100, seed: int = 7, max_value: int = 255) -> GrayGrid:
    """
    Deterministic stand-in for a real harbour map: open water on the west,
    a land mass with a wavy shoreline on the east and a few small islands.
    Water intensities sit in 200..250, land in 10..40.
    """
    rng = np.random.default_rng(seed)
    rows, cols = np.mgrid[0:height, 0:width]

    phase = rng.uniform(0, 2 * np.pi, size=2)
    shore = (
        0.78 * width
        + 0.08 * width * np.sin(2 * np.pi * rows / height * 3 + phase[0])
        + 0.04 * width * np.sin(2 * np.pi * rows / height * 7 + phase[1])
    )
    land = cols >= shore

    for _ in range(3):
        cy = rng.uniform(0.1, 0.9) * height
        cx = rng.uniform(0.15, 0.6) * width
        r = rng.uniform(0.03, 0.06) * min(width, height) + 1.0
        land |= (rows - cy) ** 2 + (cols - cx) ** 2 <= r**2

    cells = np.where(
        land,
        rng.integers(10, 41, size=(height, width)),
        rng.integers(200, 251, size=(height, width)),
    )
    return GrayGrid(width, height, max_value, np.minimum(cells, max_value))
