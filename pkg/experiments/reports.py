"""
Campaign report files.

``records.csv``
    One row per RunRecord, columns in ``RECORD_COLUMNS`` order, floats with
    six fractional digits.
``summary.json``
    ``{"optimizers": {<tag>: {runs, failed, feasibility_rate,
    mean_violation, mean_budget_gap, metrics: {<metric>: {mean, std, min,
    max}}}}}``
``history_<tag>.csv``
    ``iteration,best_cost`` of the last run.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List, Sequence

import pandas as pd

from experiments.records import RECORD_COLUMNS, RunRecord, Summary, records_frame
from planning.errors import ReportError


logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.6f"


def _write(path: Path, write) -> Path:
    try:
        write(path)
    except OSError as exc:
        raise ReportError(f"{path}: {exc.strerror or exc}") from exc
    return path


def history_frame(history: Sequence[float]) -> pd.DataFrame:
    return pd.DataFrame({"iteration": range(1, len(history) + 1), "best_cost": list(history)})


def emit_reports(
    records: Sequence[RunRecord],
    summary: Summary,
    out_dir: str | Path,
    histories: Dict[str, List[float]] | None = None,
) -> List[Path]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ReportError(f"{out}: {exc.strerror or exc}") from exc

    frame = records_frame(records)
    written = [
        _write(out / "records.csv", lambda p: frame.to_csv(p, index=False, float_format=FLOAT_FORMAT)),
        _write(out / "summary.json", lambda p: p.write_text(summary.model_dump_json(indent=2) + "\n", encoding="utf-8")),
    ]
    for tag, history in sorted((histories or {}).items()):
        hist = history_frame(history)
        written.append(
            _write(out / f"history_{tag}.csv", lambda p: hist.to_csv(p, index=False, float_format=FLOAT_FORMAT))
        )
    logger.info("Reports written to %s: %s", out, ", ".join(p.name for p in written))
    return written


def read_records(path: str | Path) -> List[RunRecord]:
    """Parse a ``records.csv`` back into RunRecords."""
    path = Path(path)
    try:
        frame = pd.read_csv(path, keep_default_na=False, float_precision="round_trip")
    except (OSError, pd.errors.ParserError) as exc:
        raise ReportError(f"{path}: {exc}") from exc
    if tuple(frame.columns) != RECORD_COLUMNS:
        raise ReportError(f"{path}: unexpected columns {list(frame.columns)}")

    def as_bool(value) -> bool:
        return value is True or str(value).lower() == "true"

    records = []
    for row in frame.to_dict(orient="records"):
        records.append(
            RunRecord(
                run=int(row["run"]),
                optimizer=str(row["optimizer"]),
                status=str(row["status"]),
                feasible=as_bool(row["feasible"]),
                cost=float(row["cost"]),
                weight=float(row["weight"]),
                tasks=int(row["tasks"]),
                time_s=float(row["time_s"]),
                distance_m=float(row["distance_m"]),
                violation_s=float(row["violation_s"]),
                wall_clock_s=float(row["wall_clock_s"]),
                replans=int(row["replans"]),
                monotone=as_bool(row["monotone"]),
                error=str(row["error"]),
            )
        )
    return records


def read_summary(path: str | Path) -> Summary:
    path = Path(path)
    try:
        return Summary.model_validate_json(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ReportError(f"{path}: {exc.strerror or exc}") from exc
