"""
Plain-text grid files.

Grayscale input::

    GG <width> <height> <max_value>
    <width*height whitespace separated integers, row-major>

Occupancy export::

    OCC <width> <height> <cell_size_m>
    <width*height values, 0 = Forbidden, 1 = Valid>
"""

from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np

from planning.errors import CellCountError, GridParseError, IntensityRangeError, MalformedHeaderError
from planning.terrain import GrayGrid, TerrainGrid


def _read_tokens(path: Path, magic: str) -> tuple[list[str], list[str]]:
    with path.open("r", encoding="utf-8") as f:
        header = f.readline().split()
        body = f.read().split()
    if len(header) != 4 or header[0] != magic:
        raise MalformedHeaderError(f"{path}: expected header '{magic} <width> <height> <value>'")
    return header, body


def _parse_dims(path: Path, header: list[str]) -> tuple[int, int]:
    try:
        width, height = int(header[1]), int(header[2])
    except ValueError as exc:
        raise MalformedHeaderError(f"{path}: non-integer dimensions in header") from exc
    if width <= 0 or height <= 0:
        raise MalformedHeaderError(f"{path}: dimensions must be positive")
    return width, height


def load_gray_grid(path: str | Path) -> GrayGrid:
    path = Path(path)
    header, body = _read_tokens(path, "GG")
    width, height = _parse_dims(path, header)
    try:
        max_value = int(header[3])
    except ValueError as exc:
        raise MalformedHeaderError(f"{path}: non-integer max_value in header") from exc
    if max_value <= 0:
        raise MalformedHeaderError(f"{path}: max_value must be positive")

    if len(body) != width * height:
        raise CellCountError(f"{path}: header declares {width * height} cells, found {len(body)}")
    try:
        cells = np.array([int(tok) for tok in body], dtype=np.int64)
    except ValueError as exc:
        raise GridParseError(f"{path}: non-integer intensity") from exc
    if cells.size and (cells.min() < 0 or cells.max() > max_value):
        raise IntensityRangeError(f"{path}: intensity outside [0, {max_value}]")

    return GrayGrid(width, height, max_value, cells)


def _write_atomic(path: Path, text: str) -> None:
    # Same pattern as the network state writer: readers never see half a file.
    path.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile("w", encoding="utf-8", dir=path.parent, delete=False, suffix=".tmp") as f:
        f.write(text)
        tmp_name = f.name
    Path(tmp_name).replace(path)


def _rows(values: np.ndarray) -> str:
    return "\n".join(" ".join(str(int(v)) for v in row) for row in values)


def save_gray_grid(grid: GrayGrid, path: str | Path) -> None:
    _write_atomic(Path(path), f"GG {grid.width} {grid.height} {grid.max_value}\n{_rows(grid.cells)}\n")


def save_terrain_grid(terrain: TerrainGrid, path: str | Path) -> None:
    header = f"OCC {terrain.width} {terrain.height} {float(terrain.cell_size_m)!r}"
    _write_atomic(Path(path), f"{header}\n{_rows(terrain.occupancy)}\n")


def load_terrain_grid(path: str | Path) -> TerrainGrid:
    path = Path(path)
    header, body = _read_tokens(path, "OCC")
    width, height = _parse_dims(path, header)
    try:
        cell_size = float(header[3])
    except ValueError as exc:
        raise MalformedHeaderError(f"{path}: non-numeric cell size in header") from exc
    if not cell_size > 0:
        raise MalformedHeaderError(f"{path}: cell size must be positive")
    if len(body) != width * height:
        raise CellCountError(f"{path}: header declares {width * height} cells, found {len(body)}")
    if any(tok not in ("0", "1") for tok in body):
        raise IntensityRangeError(f"{path}: occupancy values must be 0 or 1")
    return TerrainGrid(width, height, cell_size, np.array([int(tok) for tok in body], dtype=np.uint8))
