"""Per-run records and the campaign summary derived from them."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Dict, Iterable, Tuple

import pandas as pd
from pydantic import BaseModel, ConfigDict

from planning.evaluation import RouteMetrics


@dataclass
class RunRecord:
    run: int
    optimizer: str
    status: str = "ok"
    feasible: bool = False
    cost: float = 0.0
    weight: float = 0.0
    tasks: int = 0
    time_s: float = 0.0
    distance_m: float = 0.0
    violation_s: float = 0.0
    wall_clock_s: float = 0.0
    replans: int = 0
    monotone: bool = True
    error: str = ""

    @classmethod
    def from_metrics(
        cls,
        run: int,
        optimizer: str,
        metrics: RouteMetrics,
        wall_clock_s: float,
        replans: int = 0,
        monotone: bool = True,
    ) -> "RunRecord":
        # Rounded once here so in-memory records, CSV rows and the summary agree.
        return cls(
            run=run,
            optimizer=optimizer,
            feasible=metrics.feasible,
            cost=round(metrics.cost, 6),
            weight=round(metrics.weight, 6),
            tasks=metrics.tasks_completed,
            time_s=round(metrics.travel_time, 6),
            distance_m=round(metrics.distance, 6),
            violation_s=round(metrics.violation, 6),
            wall_clock_s=round(wall_clock_s, 6),
            replans=replans,
            monotone=monotone,
        )

    @classmethod
    def failed(cls, run: int, optimizer: str, error: str) -> "RunRecord":
        return cls(run=run, optimizer=optimizer, status="failed", error=error)

    def as_row(self) -> dict:
        return asdict(self)


RECORD_COLUMNS: Tuple[str, ...] = tuple(f.name for f in fields(RunRecord))
SUMMARY_METRICS: Tuple[str, ...] = (
    "cost",
    "weight",
    "tasks",
    "time_s",
    "distance_m",
    "violation_s",
    "wall_clock_s",
    "replans",
)
# Excluded from byte-level determinism comparisons.
WALL_CLOCK_COLUMNS: Tuple[str, ...] = ("wall_clock_s",)


class MetricStats(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean: float
    std: float
    min: float
    max: float


class OptimizerSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    runs: int
    failed: int
    feasibility_rate: float
    mean_violation: float | None
    # |T - T_avail| / T_avail averaged over feasible runs; needs the budget, so optional.
    mean_budget_gap: float | None = None
    metrics: Dict[str, MetricStats | None]


class Summary(BaseModel):
    model_config = ConfigDict(frozen=True)

    optimizers: Dict[str, OptimizerSummary] = {}


def records_frame(records: Iterable[RunRecord]) -> pd.DataFrame:
    rows = [r.as_row() for r in records]
    return pd.DataFrame(rows, columns=list(RECORD_COLUMNS))


def _stats(column: pd.Series) -> MetricStats | None:
    if column.empty:
        return None
    values = column.astype(float)
    return MetricStats(
        mean=float(values.mean()),
        std=float(values.std(ddof=0)),
        min=float(values.min()),
        max=float(values.max()),
    )


def summary_from_records(
    records: Iterable[RunRecord] | pd.DataFrame,
    t_available: float | None = None,
) -> Summary:
    """
    Aggregate per optimizer. Statistics cover successful runs; the
    feasibility rate counts failed runs as infeasible. Population standard
    deviation, so a single run has std 0.
    """
    frame = records if isinstance(records, pd.DataFrame) else records_frame(records)
    out: Dict[str, OptimizerSummary] = {}
    for tag, group in frame.groupby("optimizer", sort=True):
        ok = group[group["status"] == "ok"]
        feasible = ok[ok["feasible"].astype(bool)]
        gap = None
        if t_available is not None and not feasible.empty:
            gap = float((feasible["time_s"].astype(float) - t_available).abs().mean() / t_available)
        out[str(tag)] = OptimizerSummary(
            runs=int(len(group)),
            failed=int(len(group) - len(ok)),
            feasibility_rate=float(len(feasible) / len(group)),
            mean_violation=float(ok["violation_s"].astype(float).mean()) if not ok.empty else None,
            mean_budget_gap=gap,
            metrics={name: _stats(ok[name]) for name in SUMMARY_METRICS},
        )
    return Summary(optimizers=out)
