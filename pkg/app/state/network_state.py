from __future__ import annotations

from pathlib import Path
import json
import tempfile
from typing import Any, Dict

from networkx.readwrite import json_graph

from planning.errors import PlannerError
from planning.network import OperationNetwork
from planning.terrain import TerrainGrid


def network_to_json(network: OperationNetwork) -> Dict[str, Any]:
    """Node-link document: graph attrs carry start/goal/speed, nodes the waypoints, edges the tasks."""
    return json_graph.node_link_data(network.to_graph(), edges="edges")


def load_network(path: str | Path, terrain: TerrainGrid | None = None) -> OperationNetwork:
    """
    Load an operation network saved by ``save_network``.

    Unlike a UI state file, a network that cannot be parsed is an error, not
    an empty graph: a planner must never silently run on nothing.
    """
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise PlannerError(f"{path}: corrupt network file ({exc})") from exc

    try:
        graph = json_graph.node_link_graph(data, directed=False, multigraph=False, edges="edges")
        return OperationNetwork.from_graph(graph, terrain=terrain)
    except (KeyError, TypeError, ValueError) as exc:
        raise PlannerError(f"{path}: invalid network document ({exc})") from exc


def save_network(network: OperationNetwork, path: str | Path) -> None:
    """
    Persist the network as JSON.

    The write is done atomically via a temporary file, so readers will
    either see the old complete file or the new complete file, never a
    half-written JSON blob. Floats are written with full ``repr`` precision.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = network_to_json(network)

    with tempfile.NamedTemporaryFile(
        "w",
        encoding="utf-8",
        dir=path.parent,
        delete=False,
        suffix=".tmp",
    ) as f:
        json.dump(data, f, indent=2)
        tmp_name = f.name

    Path(tmp_name).replace(path)
