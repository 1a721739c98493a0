from __future__ import annotations
from pathlib import Path
from typing import Any, Dict, List, Sequence
import numpy as np
import plotly.graph_objects as go

from planning.network import OperationNetwork

ROUTE_COLORS = ["#E45756", "#F58518", "#54A24B", "#B279A2", "#FF9DA6"]


def _bound_circle(cx: float, cy: float, rx: float, ry: float, n: int = 48) -> tuple[list[float], list[float]]:
    t = np.linspace(0.0, 2 * np.pi, n)
    return (cx + rx * np.cos(t)).tolist(), (cy + ry * np.sin(t)).tolist()


def build_route_figure(
    network: OperationNetwork,
    routes: Sequence[Dict[str, Any]] | None = None,
    n_steps: int = 60,
    frame_duration_ms: int = 50,
    loop: bool = True,
) -> go.Figure:
    """
    Build a Plotly figure of the operation area with optional routes.

    Args:
        network: Operation network; its terrain (if any) is drawn underneath.
        routes: Optional list of dicts, each with keys:
            - "nodes": Sequence[int], waypoint ids along the route
            - "label": str, legend name
            - "color": str, CSS color (defaults cycle through ROUTE_COLORS)
          The first route also gets an animated vehicle marker.
        n_steps: Number of interpolation steps / frames for the animation.
        frame_duration_ms: Playback speed; duration of each frame in ms.
        loop: Whether the Play button should loop the animation.

    Returns:
        A configured ``go.Figure``.
    """
    pos = {w.id: w.current.as_tuple()[:2] for w in network.waypoints}

    fig = go.Figure()

    # --- Terrain ---
    terrain = network.terrain
    if terrain is not None:
        cell = terrain.cell_size_m
        fig.add_trace(go.Heatmap(
            z=terrain.occupancy,
            x0=cell / 2,
            dx=cell,
            y0=cell / 2,
            dy=cell,
            colorscale=[[0.0, "#C8B88A"], [1.0, "#D6EAF8"]],
            showscale=False,
            hoverinfo="skip",
        ))

    # --- Dynamic waypoint drift regions (confidence ellipses around the anchor) ---
    for w in network.waypoints:
        if not w.is_dynamic:
            continue
        xs, ys = _bound_circle(w.base.x, w.base.y, w.bound.x, w.bound.y)
        fig.add_trace(go.Scatter(
            x=xs,
            y=ys,
            mode="lines",
            fill="toself",
            fillcolor="rgba(128,128,128,0.25)",
            line=dict(color="gray", width=1),
            hoverinfo="skip",
            showlegend=False,
        ))

    # --- Edges ---
    edge_x: List[float | None] = []
    edge_y: List[float | None] = []
    for e in network.edges:
        (x0, y0), (x1, y1) = pos[e.i], pos[e.j]
        edge_x += [x0, x1, None]
        edge_y += [y0, y1, None]
    fig.add_trace(go.Scatter(
        x=edge_x,
        y=edge_y,
        mode="lines",
        line=dict(color="#9DA5B4", width=1),
        hoverinfo="skip",
        showlegend=False,
    ))

    # --- Waypoints ---
    node_ids = list(pos.keys())
    hover_texts = []
    colors = []
    for node_id in node_ids:
        w = network.waypoints[node_id]
        role = "start" if node_id == network.start_id else "goal" if node_id == network.goal_id else w.kind.value
        hover_texts.append(f"{node_id} ({role})<br>x={w.current.x:.1f} y={w.current.y:.1f} z={w.current.z:.1f}")
        if role == "start":
            colors.append("#54A24B")
        elif role == "goal":
            colors.append("#E45756")
        else:
            colors.append("#F58518" if w.is_dynamic else "#4C78A8")

    fig.add_trace(go.Scatter(
        x=[p[0] for p in pos.values()],
        y=[p[1] for p in pos.values()],
        mode="markers+text",
        text=node_ids,
        textposition="bottom center",
        marker=dict(size=12, color=colors),
        hoverinfo="text",
        hovertext=hover_texts,
        showlegend=False,
    ))

    # --- Routes ---
    valid_routes = [r for r in (routes or []) if len(r.get("nodes", [])) >= 2]
    for idx, route in enumerate(valid_routes):
        nodes = list(route["nodes"])
        fig.add_trace(go.Scatter(
            x=[pos[n][0] for n in nodes],
            y=[pos[n][1] for n in nodes],
            mode="lines",
            line=dict(color=route.get("color", ROUTE_COLORS[idx % len(ROUTE_COLORS)]), width=3),
            name=route.get("label", f"route {idx}"),
        ))

    # --- Animation frames (vehicle on the first route) ---
    if valid_routes:
        nodes = list(valid_routes[0]["nodes"])
        x0, y0 = pos[nodes[0]]
        fig.add_trace(go.Scatter(
            x=[x0],
            y=[y0],
            mode="markers",
            marker=dict(size=16, color="black", symbol="diamond"),
            hoverinfo="skip",
            showlegend=False,
        ))
        vehicle_trace = len(fig.data) - 1

        frames: List[go.Frame] = []
        seg_count = len(nodes) - 1
        for step in range(n_steps + 1):
            seg_float = step / n_steps * seg_count
            seg_idx = int(seg_float)
            local_t = seg_float - seg_idx
            if seg_idx >= seg_count:
                seg_idx = seg_count - 1
                local_t = 1.0

            (xa, ya), (xb, yb) = pos[nodes[seg_idx]], pos[nodes[seg_idx + 1]]
            frames.append(go.Frame(
                data=[go.Scatter(x=[xa * (1 - local_t) + xb * local_t], y=[ya * (1 - local_t) + yb * local_t])],
                traces=[vehicle_trace],
                name=str(step),
            ))
        fig.frames = frames

        frame_names = [str(i) for i in range(len(frames))]
        sequence = frame_names * (5 if loop else 1)
        play_args: Dict[str, Any] = {
            "frame": {"duration": frame_duration_ms, "redraw": True},
            "fromcurrent": False,
            "transition": {"duration": 0},
            "mode": "immediate",
        }
        fig.update_layout(
            updatemenus=[
                dict(
                    type="buttons",
                    showactive=False,
                    buttons=[
                        dict(label="▶", method="animate", args=[sequence, play_args]),
                        dict(
                            label="⏹",
                            method="animate",
                            args=[[None], {"mode": "immediate", "frame": {"duration": 0, "redraw": False}}],
                        ),
                    ],
                    direction="left",
                    x=0,
                    xanchor="left",
                    y=1.08,
                    yanchor="top",
                )
            ]
        )

    # --- Layout ---
    fig.update_layout(
        height=720,
        margin=dict(l=10, r=10, t=40, b=10),
        xaxis=dict(title="x [m]", constrain="domain"),
        yaxis=dict(title="y [m]", scaleanchor="x", scaleratio=1),
    )
    return fig


def write_route_figure(fig: go.Figure, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.write_html(str(path), include_plotlyjs="cdn", auto_play=False)
    return path
