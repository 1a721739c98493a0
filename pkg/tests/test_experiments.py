import json

import networkx as nx
import pandas as pd
import pytest

from experiments.config import ExperimentConfig, load_experiment_config, parse_experiment_config
from experiments.montecarlo import child_rng, execute_run, is_monotone, run_monte_carlo
from experiments.records import RECORD_COLUMNS, RunRecord, summary_from_records
from experiments.reports import emit_reports, read_records, read_summary
from experiments.scenario import generate_scenario, load_terrain
from planning.errors import ConfigError, InfeasibleTerrainError, ReportError
from planning.terrain import is_valid_position

from conftest import CONFIG_DIR


def tiny(cfg: ExperimentConfig, runs: int = 2, **experiment) -> ExperimentConfig:
    section = cfg.experiment.model_copy(update={"runs": runs, **experiment})
    return cfg.model_copy(update={"experiment": section})


@pytest.fixture
def demo():
    return load_experiment_config(CONFIG_DIR / "demo.toml")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def test_demo_config(demo):
    assert demo.scenario.waypoints == 8
    assert demo.experiment.optimizers == ["pso", "bbo"]
    assert demo.mission.cost == demo.cost
    assert demo.mission.pso == demo.pso


def test_campaign_config_resolves_terrain_path():
    cfg = load_experiment_config(CONFIG_DIR / "campaign.toml")
    assert cfg.scenario.waypoints == 40
    assert cfg.cost.t_available == 3.1e4
    assert (cfg.cost.phi1, cfg.cost.phi2) == (1.0, 0.002)
    assert cfg.scenario.terrain.endswith("coastline.gg")
    assert (cfg.pso.particles, cfg.bbo.habitats, cfg.experiment.runs) == (150, 50, 200)


def test_missing_config_names_path(tmp_path):
    missing = tmp_path / "nope.toml"
    with pytest.raises(ConfigError) as info:
        load_experiment_config(missing)
    assert str(missing) in str(info.value)


@pytest.mark.parametrize(
    "text",
    [
        "[experiment]\nruns = 0\n",
        "[experiment]\nmode = \"sometimes\"\n",
        "[scenario]\nwaypoints = 5\nstart_id = 7\n",
        "[bbo]\nhabitats = 4\nkept_habitats = 4\n",
        "[scenario]\nunknown_key = 1\n",
        "[experiment\nruns = 1\n",
    ],
)
def test_invalid_configs(tmp_path, text):
    path = tmp_path / "bad.toml"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(ConfigError) as info:
        load_experiment_config(path)
    assert str(path) in str(info.value)


def test_missing_terrain_file(tmp_path):
    path = tmp_path / "cfg.toml"
    path.write_text('[scenario]\nterrain = "maps/none.gg"\n', encoding="utf-8")
    with pytest.raises(ConfigError):
        load_experiment_config(path)


def test_seed_override(demo):
    assert demo.with_seed(5).experiment.master_seed == 5
    assert demo.experiment.master_seed == 2017


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------

def test_generated_scenario(demo):
    network = generate_scenario(demo.scenario, child_rng(1, 0, 0))
    assert len(network) == 8
    assert network.start_id != network.goal_id
    assert len(network.dynamic_ids()) == 2
    assert network.start_id not in network.dynamic_ids()
    assert nx.is_connected(network.to_graph())


def test_scenario_on_synthetic_coastline():
    cfg = parse_experiment_config({"scenario": {"terrain": "synthetic", "waypoints": 15}})
    terrain = load_terrain(cfg.scenario)
    network = generate_scenario(cfg.scenario, child_rng(2, 0, 0), terrain)
    for w in network.waypoints:
        assert is_valid_position(terrain, w.base.x, w.base.y)
        assert is_valid_position(terrain, w.current.x, w.current.y)


def test_scenarios_are_reproducible(demo):
    a = generate_scenario(demo.scenario, child_rng(3, 1, 0))
    b = generate_scenario(demo.scenario, child_rng(3, 1, 0))
    assert (a.positions() == b.positions()).all()
    assert [e.task for e in a.edges] == [e.task for e in b.edges]


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

def test_one_record_per_run_and_optimizer(demo):
    records, summary = run_monte_carlo(tiny(demo, runs=3))
    assert [(r.run, r.optimizer) for r in records] == [(i, t) for i in range(3) for t in ("pso", "bbo")]
    assert set(summary.optimizers) == {"pso", "bbo"}
    assert all(r.monotone for r in records)


def test_campaign_is_deterministic(demo):
    cfg = tiny(demo, runs=2)
    a = [r.as_row() for r in run_monte_carlo(cfg).records]
    b = [r.as_row() for r in run_monte_carlo(cfg).records]
    for row in a + b:
        row.pop("wall_clock_s")
    assert a == b


def test_optimizers_see_the_same_scenario(demo):
    cfg = tiny(demo, runs=1)
    both = execute_run(cfg, 0).records
    only_bbo = execute_run(cfg.model_copy(update={"experiment": cfg.experiment.model_copy(update={"optimizers": ["bbo"]})}), 0).records
    assert both[1].as_row() | {"wall_clock_s": 0} == only_bbo[0].as_row() | {"wall_clock_s": 0}


def test_single_run_summary_equals_record(demo):
    campaign = run_monte_carlo(tiny(demo, runs=1, optimizers=["pso"]))
    record = campaign.records[0]
    stats = campaign.summary.optimizers["pso"]
    assert stats.runs == 1
    assert stats.metrics["cost"].mean == record.cost
    assert stats.metrics["cost"].std == 0.0
    assert stats.metrics["time_s"].min == stats.metrics["time_s"].max == record.time_s
    assert stats.mean_violation == record.violation_s
    assert set(campaign.histories) == {"pso"}


def test_fixed_mode_keeps_waypoint_count(demo):
    records, _ = run_monte_carlo(tiny(demo, runs=2, mode="fixed"))
    assert len(records) == 4


def test_mission_mode_counts_replans(demo):
    records, _ = run_monte_carlo(tiny(demo, runs=1, mission=True))
    assert len(records) == 2
    assert all(r.replans >= 0 for r in records)


def test_failed_runs_are_recorded(demo, monkeypatch):
    import experiments.montecarlo as montecarlo

    def no_water(*args, **kwargs):
        raise InfeasibleTerrainError("no water cells")

    monkeypatch.setattr(montecarlo, "generate_scenario", no_water)
    records, summary = run_monte_carlo(tiny(demo, runs=2))
    assert [r.status for r in records] == ["failed"] * 4
    assert all(r.error == "no water cells" for r in records)
    assert summary.optimizers["pso"].feasibility_rate == 0.0
    assert summary.optimizers["pso"].failed == 2
    assert summary.optimizers["pso"].mean_violation is None


def test_is_monotone():
    assert is_monotone([3.0, 2.0, 2.0, 1.0])
    assert not is_monotone([1.0, 2.0])
    assert is_monotone([])


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def test_reports_round_trip(tmp_path, demo):
    campaign = run_monte_carlo(tiny(demo, runs=3))
    paths = emit_reports(campaign.records, campaign.summary, tmp_path, campaign.histories)
    assert {p.name for p in paths} == {"records.csv", "summary.json", "history_pso.csv", "history_bbo.csv"}

    assert read_records(tmp_path / "records.csv") == campaign.records

    frame = pd.read_csv(tmp_path / "records.csv")
    assert tuple(frame.columns) == RECORD_COLUMNS
    assert len(frame) == 6

    stored = read_summary(tmp_path / "summary.json")
    recomputed = summary_from_records(read_records(tmp_path / "records.csv"), demo.cost.t_available)
    for tag, s in stored.optimizers.items():
        r = recomputed.optimizers[tag]
        assert abs(s.feasibility_rate - r.feasibility_rate) <= 1e-9
        for name, stats in s.metrics.items():
            for field in ("mean", "std", "min", "max"):
                assert abs(getattr(stats, field) - getattr(r.metrics[name], field)) <= 1e-9

    history = pd.read_csv(tmp_path / "history_pso.csv")
    assert list(history.columns) == ["iteration", "best_cost"]
    assert len(history) == demo.pso.iterations


def test_empty_reports(tmp_path):
    emit_reports([], summary_from_records([]), tmp_path)
    assert (tmp_path / "records.csv").read_text().strip() == ",".join(RECORD_COLUMNS)
    assert json.loads((tmp_path / "summary.json").read_text()) == {"optimizers": {}}


def test_six_decimal_floats(tmp_path):
    record = RunRecord(run=0, optimizer="pso", feasible=True, cost=0.1234564, time_s=12.5)
    emit_reports([record], summary_from_records([record]), tmp_path)
    row = (tmp_path / "records.csv").read_text().splitlines()[1].split(",")
    assert row[RECORD_COLUMNS.index("cost")] == "0.123456"
    assert row[RECORD_COLUMNS.index("time_s")] == "12.500000"


def test_unwritable_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ReportError):
        emit_reports([], summary_from_records([]), blocker / "sub")


# ---------------------------------------------------------------------------
# Full-size campaign
# ---------------------------------------------------------------------------

@pytest.mark.slow
def test_full_campaign_is_feasible_and_uses_the_budget():
    cfg = load_experiment_config(CONFIG_DIR / "campaign.toml")
    records, summary = run_monte_carlo(cfg)
    budget = cfg.cost.t_available
    assert len(records) == 2 * cfg.experiment.runs
    assert all(r.monotone for r in records)
    for tag, stats in summary.optimizers.items():
        assert stats.failed == 0, tag
        assert stats.feasibility_rate >= 0.95, tag
        assert stats.mean_violation <= 0.01 * budget, tag
        assert stats.mean_budget_gap <= 0.10, tag


@pytest.mark.slow
@pytest.mark.parametrize("tag", ["pso", "bbo"])
def test_single_full_size_plan_runs_at_desk_scale(tag):
    cfg = load_experiment_config(CONFIG_DIR / "campaign.toml")
    outcome = execute_run(cfg.model_copy(update={"experiment": cfg.experiment.model_copy(update={"optimizers": [tag]})}), 0)
    record = outcome.records[0]
    assert record.status == "ok"
    assert record.wall_clock_s < 5.0
