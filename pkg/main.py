"""
Command line front end.

    python main.py [--seed N] [--log-level LEVEL] <command> [--seed N] ...

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""

from __future__ import annotations

import logging
import os
import sys
from pathlib import Path
from typing import Sequence

import click
from dotenv import load_dotenv

from app.state.grid_state import load_gray_grid, save_terrain_grid
from app.state.network_state import load_network, save_network
from experiments.config import ExperimentConfig, load_experiment_config
from experiments.montecarlo import STREAM_MISSION, STREAM_OPTIMIZER, STREAM_SCENARIO, child_rng, run_monte_carlo
from experiments.reports import emit_reports
from experiments.scenario import generate_scenario, load_terrain
from optimizers import make_optimizer
from planning.errors import ConfigError, MissionFailedError, PlannerError
from planning.evaluation import CSV_FIELDS
from planning.network import OperationNetwork
from planning.terrain import kmeans_cluster
from simulation.mission import run_mission


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

LOG_LEVEL_ENV = "ROUTEPLAN_LOG_LEVEL"
OPTIMIZER_CHOICE = click.Choice(["pso", "bbo"])


def _store_seed(ctx: click.Context, param: click.Parameter, value: int | None) -> int | None:
    if value is not None:
        ctx.obj["seed"] = value
    return value


# Accepted after the subcommand too; the later value wins.
seed_option = click.option(
    "--seed", type=int, default=None, expose_value=False, callback=_store_seed,
    help="Override experiment.master_seed.",
)


def setup_logging(level: str | None) -> None:
    load_dotenv()
    name = (level or os.getenv(LOG_LEVEL_ENV) or "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, name, logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )


def _load_config(ctx: click.Context, path: str) -> ExperimentConfig:
    cfg = load_experiment_config(path)
    seed = ctx.obj.get("seed")
    return cfg.with_seed(seed) if seed is not None else cfg


def _network_for(cfg: ExperimentConfig, network_path: str | None) -> OperationNetwork:
    # Same realization as Monte Carlo run 0.
    terrain = load_terrain(cfg.scenario)
    if network_path:
        return load_network(network_path, terrain=terrain)
    return generate_scenario(cfg.scenario, child_rng(cfg.experiment.master_seed, 0, STREAM_SCENARIO), terrain)


def _write_figure(network: OperationNetwork, routes, path: str) -> None:
    from app.ui.plotly_route import build_route_figure, write_route_figure

    out = write_route_figure(build_route_figure(network, routes), path)
    click.echo(f"figure: {out}")


@click.group()
@click.option("--seed", type=int, default=None, help="Override experiment.master_seed.")
@click.option("--log-level", default=None, help=f"Logging level (default: ${LOG_LEVEL_ENV} or WARNING).")
@click.pass_context
def cli(ctx: click.Context, seed: int | None, log_level: str | None) -> None:
    """AUV task-assignment route planning toolkit."""
    setup_logging(log_level)
    ctx.ensure_object(dict)
    ctx.obj["seed"] = seed


@cli.command("cluster-map")
@seed_option
@click.argument("grid_in")
@click.argument("occupancy_out")
@click.option("--k", "k", type=click.IntRange(min=1), default=2, show_default=True)
@click.option("--max-iters", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--cell-size", type=click.FloatRange(min=0, min_open=True), default=10.0, show_default=True, help="Cell edge length in metres.")
@click.pass_context
def cluster_map(ctx: click.Context, grid_in: str, occupancy_out: str, k: int, max_iters: int, cell_size: float) -> None:
    """Cluster a GG grayscale grid into a Valid/Forbidden occupancy grid."""
    seed = ctx.obj.get("seed") or 0
    terrain = kmeans_cluster(load_gray_grid(grid_in), k=k, max_iters=max_iters, seed=seed, cell_size_m=cell_size)
    save_terrain_grid(terrain, occupancy_out)
    click.echo(f"{occupancy_out}: {terrain.valid_cells} valid of {terrain.width * terrain.height} cells")


@cli.command("gen-network")
@seed_option
@click.argument("config")
@click.argument("out")
@click.pass_context
def gen_network(ctx: click.Context, config: str, out: str) -> None:
    """Generate a scenario network and save it as JSON."""
    cfg = _load_config(ctx, config)
    network = _network_for(cfg, None)
    save_network(network, out)
    click.echo(
        f"{out}: {len(network)} waypoints, {len(network.edges)} edges, "
        f"start={network.start_id} goal={network.goal_id}"
    )


@cli.command("plan")
@seed_option
@click.argument("config")
@click.option("--optimizer", "optimizer", type=OPTIMIZER_CHOICE, default=None, help="Default: every configured optimizer.")
@click.option("--network", "network_path", default=None, help="Plan on a saved network instead of generating one.")
@click.option("--figure", default=None, help="Write an HTML figure of the planned routes.")
@click.pass_context
def plan(ctx: click.Context, config: str, optimizer: str | None, network_path: str | None, figure: str | None) -> None:
    """Run one optimization per optimizer and print route and metrics."""
    cfg = _load_config(ctx, config)
    network = _network_for(cfg, network_path)
    tags = [optimizer] if optimizer else list(cfg.experiment.optimizers)

    click.echo("optimizer," + ",".join(CSV_FIELDS) + ",wall_clock_s")
    routes = []
    for tag in tags:
        rng = child_rng(cfg.experiment.master_seed, 0, STREAM_OPTIMIZER[tag])
        result = make_optimizer(tag, cfg.pso, cfg.bbo).plan(network, cfg.cost, rng)
        click.echo(f"{tag},{result.metrics.csv_row()},{result.wall_clock_s:.6f}")
        click.echo(f"{tag} route: {result.route.to_line()}")
        routes.append({"nodes": result.route.node_sequence, "label": tag})

    if figure:
        _write_figure(network, routes, figure)


@cli.command("simulate")
@seed_option
@click.argument("config")
@click.option("--optimizer", "optimizer", type=OPTIMIZER_CHOICE, default=None, help="Default: mission.optimizer.")
@click.option("--network", "network_path", default=None, help="Fly a saved network instead of generating one.")
@click.option("--out", default=None, help="Write the mission event log (JSON lines) here; default stdout.")
@click.option("--figure", default=None, help="Write an HTML figure of planned, replanned and flown routes.")
@click.pass_context
def simulate(
    ctx: click.Context,
    config: str,
    optimizer: str | None,
    network_path: str | None,
    out: str | None,
    figure: str | None,
) -> None:
    """Fly one mission with drift and replanning."""
    cfg = _load_config(ctx, config)
    network = _network_for(cfg, network_path)
    mission_cfg = cfg.mission_for(optimizer) if optimizer else cfg.mission
    rng = child_rng(cfg.experiment.master_seed, 0, STREAM_MISSION)

    failure: MissionFailedError | None = None
    try:
        log = run_mission(network, mission_cfg, rng)
    except MissionFailedError as exc:
        failure, log = exc, exc.log

    lines = "\n".join(log.to_lines()) + "\n"
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(lines, encoding="utf-8")
        click.echo(f"mission log: {path}")
    else:
        click.echo(lines, nl=False)

    click.echo(f"outcome: {log.outcome.value if log.outcome else 'unknown'}")
    click.echo("flown: " + ",".join(str(n) for n in log.flown_nodes))
    click.echo(",".join(CSV_FIELDS) + ",replans,remaining_budget_s")
    click.echo(f"{log.metrics.csv_row()},{log.replan_count},{log.remaining_budget:.6f}")

    if figure:
        routes = []
        if log.initial_plan is not None:
            routes.append({"nodes": log.initial_plan.route.node_sequence, "label": "initial plan"})
        for i, r in enumerate(log.replans, start=1):
            routes.append({"nodes": r.route.node_sequence, "label": f"replan {i}"})
        routes.insert(0, {"nodes": log.flown_nodes, "label": "flown", "color": "black"})
        _write_figure(network, routes, figure)

    if failure is not None:
        raise failure


@cli.command("montecarlo")
@seed_option
@click.argument("config")
@click.option("--out", required=True, help="Report directory.")
@click.option("--workers", type=int, default=None, help="Override experiment.workers.")
@click.option("--progress/--no-progress", default=False, show_default=True)
@click.pass_context
def montecarlo(ctx: click.Context, config: str, out: str, workers: int | None, progress: bool) -> None:
    """Run a seeded Monte Carlo campaign and write reports."""
    cfg = _load_config(ctx, config)
    if workers is not None:
        if workers < 1:
            raise click.BadParameter("must be >= 1", param_hint="--workers")
        cfg = cfg.model_copy(update={"experiment": cfg.experiment.model_copy(update={"workers": workers})})

    campaign = run_monte_carlo(cfg, progress=progress)
    paths = emit_reports(campaign.records, campaign.summary, out, campaign.histories)
    for tag, s in campaign.summary.optimizers.items():
        click.echo(
            f"{tag}: runs={s.runs} failed={s.failed} feasibility={s.feasibility_rate:.6f} "
            f"mean_violation={(s.mean_violation or 0.0):.6f}"
        )
    for p in paths:
        click.echo(f"wrote {p}")


def cli_main(argv: Sequence[str] | None = None) -> int:
    try:
        result = cli.main(args=list(argv) if argv is not None else None, prog_name="routeplan", standalone_mode=False)
    except click.UsageError as exc:
        click.echo(exc.format_message(), err=True)
        ctx = exc.ctx
        click.echo(ctx.get_usage() if ctx is not None else cli.get_usage(click.Context(cli)), err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except click.Abort:
        return EXIT_USAGE
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return EXIT_USAGE
    except (PlannerError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_RUNTIME
    return result if isinstance(result, int) else EXIT_OK


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
