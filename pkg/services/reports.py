"""
Report files: CSV and JSON experiment reports, bias-vector tables and
bias-sweep tables.

report.csv columns:
    row, method, status, retain_acc, forget_acc, time_s, rtr,
    bsc, mbg, mbs, leak_match, suspected, error
time_s is rounded to the microsecond; time_s and rtr stay empty for rows
without honest timing (the Original row, parallel method runs, failures).

report.json holds the same rows with the full nested results, plus the
config snapshot, library versions and timestamps.
"""
import json
import logging
import os
import platform
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
import scipy

import config
from services.metrics import EvalResult

logger = logging.getLogger(__name__)

REPORT_COLUMNS = [
    "row", "method", "status", "retain_acc", "forget_acc", "time_s", "rtr",
    "bsc", "mbg", "mbs", "leak_match", "suspected", "error",
]
BIAS_COLUMNS = ["row", "class", "bias", "in_V"]
SWEEP_COLUMNS = ["beta", "retain_acc", "forget_acc"]

STATUS_OK = "ok"
STATUS_FAILED = "failed"


@dataclass
class ReportRow:
    name: str
    method: str
    status: str = STATUS_OK
    result: Optional[EvalResult] = None
    config: dict = field(default_factory=dict)
    error: Optional[str] = None
    checkpoint: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK

    def as_dict(self) -> dict:
        return {
            "row": self.name,
            "method": self.method,
            "status": self.status,
            "error": self.error,
            "checkpoint": self.checkpoint,
            "config": self.config,
            "result": self.result.as_dict() if self.result else None,
        }


@dataclass
class ExperimentReport:
    rows: List[ReportRow]
    config: dict
    parallel: bool = False
    t_retrain: Optional[float] = None
    versions: dict = field(default_factory=lambda: library_versions())
    started_at: str = field(default_factory=lambda: now_iso())
    finished_at: Optional[str] = None

    def row(self, name: str) -> ReportRow:
        for row in self.rows:
            if row.name == name:
                return row
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {
            "app": config.APP_NAME,
            "versions": self.versions,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "parallel": self.parallel,
            "t_retrain": self.t_retrain,
            "config": self.config,
            "rows": [row.as_dict() for row in self.rows],
        }


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def library_versions() -> dict:
    return {
        config.APP_NAME: config.APP_VERSION,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
    }


def _seconds(value: Optional[float]) -> Optional[float]:
    return None if value is None else round(float(value), 6)


def _flat_row(row: ReportRow) -> dict:
    flat = {column: None for column in REPORT_COLUMNS}
    flat.update(row=row.name, method=row.method, status=row.status, error=row.error)
    result = row.result
    if result is not None:
        flat.update(
            retain_acc=result.retain_acc,
            forget_acc=result.forget_acc,
            time_s=_seconds(result.elapsed),
            rtr=result.rtr,
            bsc=result.bias.bsc,
            mbg=result.bias.mbg,
            mbs=result.bias.mbs,
            leak_match=result.bias.leakage_exact_match,
            suspected=result.bias_dominated_suspected,
        )
    return flat


def _typed(frame: pd.DataFrame) -> pd.DataFrame:
    frame = frame.reindex(columns=REPORT_COLUMNS)
    for column in ("retain_acc", "forget_acc", "time_s", "rtr", "bsc", "mbg", "mbs"):
        frame[column] = pd.to_numeric(frame[column]).astype("float64")
    for column in ("leak_match", "suspected"):
        frame[column] = frame[column].astype("boolean")
    for column in ("row", "method", "status", "error"):
        frame[column] = frame[column].astype("string")
    return frame


def report_frame(report: ExperimentReport) -> pd.DataFrame:
    """One line per row, REPORT_COLUMNS order."""
    return _typed(pd.DataFrame([_flat_row(row) for row in report.rows], columns=REPORT_COLUMNS))


def _report_json_payload(report: ExperimentReport) -> dict:
    payload = report.as_dict()
    for row, flat in zip(payload["rows"], (_flat_row(r) for r in report.rows)):
        row["summary"] = flat
        if row["result"] is not None:
            row["result"]["elapsed"] = flat["time_s"]
    return payload


def write_report(report: ExperimentReport, output_dir: str) -> dict:
    """
    Write report.csv and report.json.

    Returns:
        {"csv": path, "json": path}
    """
    os.makedirs(output_dir, exist_ok=True)
    csv_path = os.path.join(output_dir, config.REPORT_CSV)
    json_path = os.path.join(output_dir, config.REPORT_JSON)

    report_frame(report).to_csv(csv_path, index=False)
    with open(json_path, "w", encoding="utf-8") as f:
        json.dump(_report_json_payload(report), f, indent=2)

    logger.info("report written: %s, %s (%d rows)", csv_path, json_path, len(report.rows))
    return {"csv": csv_path, "json": json_path}


def bias_frame(rows: Sequence[ReportRow], bias_by_row: dict, forgotten: Sequence[int]) -> pd.DataFrame:
    """Long table (row, class, bias, in_V) for every model with a bias vector."""
    forgotten = set(forgotten)
    records = [
        {"row": row.name, "class": c, "bias": float(b), "in_V": c in forgotten}
        for row in rows if row.name in bias_by_row
        for c, b in enumerate(bias_by_row[row.name])
    ]
    return pd.DataFrame(records, columns=BIAS_COLUMNS)


def write_bias_vectors(frame: pd.DataFrame, output_dir: str) -> str:
    os.makedirs(output_dir, exist_ok=True)
    path = os.path.join(output_dir, config.BIAS_VECTORS_CSV)
    frame.to_csv(path, index=False)
    logger.info("bias vectors written: %s", path)
    return path


def dump_frame(bias: np.ndarray, forgotten: Optional[Sequence[int]] = None) -> pd.DataFrame:
    """(class, bias, in_V) ordered by class; in_V is empty when V is unknown."""
    in_v = [None] * len(bias) if forgotten is None else [c in set(forgotten) for c in range(len(bias))]
    return pd.DataFrame({
        "class": np.arange(len(bias)),
        "bias": np.asarray(bias, dtype=np.float64),
        "in_V": pd.array(in_v, dtype="boolean"),
    })


def write_sweep(frame: pd.DataFrame, output_dir: str) -> str:
    os.makedirs(output_dir, exist_ok=True)
    path = os.path.join(output_dir, config.SWEEP_CSV)
    frame.to_csv(path, index=False)
    logger.info("beta sweep written: %s", path)
    return path
