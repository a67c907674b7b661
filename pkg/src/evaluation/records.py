from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
import pandas as pd

from common.errors import DataError, ParseError
from evaluation.metrics import MetricSummary, summarize
from framing.types import PLACEMENTS, Placement

RECORD_COLUMNS = [
    "dataset",
    "model",
    "explainer",
    "window_id",
    "comparison",
    "tau",
    "rho",
    "recall_top",
    "recall_middle",
    "recall_bottom",
]
CELL_KEYS = ["dataset", "model", "explainer"]
SWAP_PREFIX = "swap-"


@dataclass(slots=True)
class EvaluationRecord:
    dataset: str
    model: str
    explainer: str
    window_id: str
    comparison: str
    tau: Optional[float]
    rho: Optional[float]
    recall: dict[Placement, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in ("tau", "rho"):
            value = getattr(self, name)
            if value is not None and not -1.0 <= value <= 1.0:
                raise DataError(f"{name}={value} outside [-1, 1] for {self.window_id}")
        for placement, value in self.recall.items():
            if not 0.0 <= value <= 1.0:
                raise DataError(f"recall_{placement.value}={value} outside [0, 1] for {self.window_id}")

    @property
    def protocol(self) -> str:
        return "robustness" if self.comparison.startswith(SWAP_PREFIX) else "consistency"

    def to_row(self) -> dict[str, object]:
        row: dict[str, object] = {
            "dataset": self.dataset,
            "model": self.model,
            "explainer": self.explainer,
            "window_id": self.window_id,
            "comparison": self.comparison,
            "tau": self.tau,
            "rho": self.rho,
        }
        for p in PLACEMENTS:
            row[f"recall_{p.value}"] = self.recall.get(p)
        return row


def _format_value(value: object) -> str:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def records_to_csv(records: Iterable[EvaluationRecord]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(RECORD_COLUMNS)
    for record in records:
        row = record.to_row()
        writer.writerow([_format_value(row[c]) for c in RECORD_COLUMNS])
    return buffer.getvalue()


def write_records(records: Iterable[EvaluationRecord], path: str | Path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(records_to_csv(records), encoding="utf-8")
    return out


def read_records(path: str | Path) -> pd.DataFrame:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != RECORD_COLUMNS:
        raise ParseError(f"{path.name}: header must be {','.join(RECORD_COLUMNS)}", line=1)
    parsed = []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(RECORD_COLUMNS):
            raise ParseError(f"{path.name}: expected {len(RECORD_COLUMNS)} fields, got {len(row)}", line=line_no)
        entry: dict[str, object] = dict(zip(RECORD_COLUMNS[:5], row[:5]))
        for column, raw in zip(RECORD_COLUMNS[5:], row[5:]):
            try:
                value = float(raw) if raw.strip() else np.nan
            except ValueError as exc:
                raise ParseError(f"{path.name}: {column} is not a number ({raw!r})", line=line_no) from exc
            low = -1.0 if column in ("tau", "rho") else 0.0
            if not np.isnan(value) and not low <= value <= 1.0:
                raise ParseError(f"{path.name}: {column}={value} out of range", line=line_no)
            entry[column] = value
        parsed.append(entry)
    return pd.DataFrame(parsed, columns=RECORD_COLUMNS)


def records_frame(records: Iterable[EvaluationRecord]) -> pd.DataFrame:
    frame = pd.DataFrame([r.to_row() for r in records], columns=RECORD_COLUMNS)
    for column in RECORD_COLUMNS[5:]:
        frame[column] = pd.to_numeric(frame[column], errors="coerce")
    return frame


def protocol_of(frame: pd.DataFrame) -> np.ndarray:
    return np.where(frame["comparison"].str.startswith(SWAP_PREFIX), "robustness", "consistency")


def _cells(frame: pd.DataFrame) -> list[tuple[str, str, str]]:
    return list(dict.fromkeys(zip(frame["dataset"], frame["model"], frame["explainer"])))


def aggregate(frame: pd.DataFrame, metric: str) -> dict[tuple[str, str, str], Optional[MetricSummary]]:
    """One summary per (dataset, model, explainer) over every window and comparison.

    Cells keep first-appearance order; a cell with no defined value maps to ``None``.
    """
    out: dict[tuple[str, str, str], Optional[MetricSummary]] = {}
    for cell in _cells(frame):
        mask = (frame["dataset"] == cell[0]) & (frame["model"] == cell[1]) & (frame["explainer"] == cell[2])
        values = frame.loc[mask, metric].tolist()
        out[cell] = summarize(v for v in values if v is not None and np.isfinite(v))
    return out


def recall_by_placement(
    frame: pd.DataFrame,
) -> dict[tuple[str, str, str], dict[Placement, Optional[MetricSummary]]]:
    """Recall@k summaries per cell and placement, one value per (window, placement).

    Consistency rows repeat a window's recall on all three pairs, so duplicates are
    dropped on (window, comparison-protocol) before summarizing.
    """
    out: dict[tuple[str, str, str], dict[Placement, Optional[MetricSummary]]] = {}
    for cell in _cells(frame):
        mask = (frame["dataset"] == cell[0]) & (frame["model"] == cell[1]) & (frame["explainer"] == cell[2])
        sub = frame.loc[mask]
        per_placement: dict[Placement, Optional[MetricSummary]] = {}
        for p in PLACEMENTS:
            column = f"recall_{p.value}"
            values = sub.loc[sub[column].notna(), ["window_id", column]]
            values = values.drop_duplicates(subset=["window_id"])
            per_placement[p] = summarize(values[column].tolist())
        out[cell] = per_placement
    return out


def coefficient_table(frame: pd.DataFrame) -> pd.DataFrame:
    table = frame[["dataset", "model", "explainer", "window_id", "comparison", "tau", "rho"]].copy()
    table.insert(3, "protocol", protocol_of(frame))
    table["abs_tau"] = table["tau"].abs()
    table["abs_rho"] = table["rho"].abs()
    return table
