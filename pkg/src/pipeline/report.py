"""Tables rendered from a records CSV.

Cells are ``mean±std`` with population std over every window and comparison of
one (dataset, model, explainer); undefined correlations are left out of a cell
and a cell with nothing left prints as ``—``.
"""
from __future__ import annotations

from pathlib import Path
from typing import Optional

import pandas as pd

from attribution.io import read_map
from common.errors import ConfigurationError
from evaluation.metrics import MetricSummary
from evaluation.records import aggregate, coefficient_table, protocol_of, recall_by_placement
from framing.types import PLACEMENTS

MISSING = "—"
FORMATS = ("csv", "md")
LEADER = "LSTM"
HEADER_NOTE = (
    "mean±std over windows and comparisons (population std); "
    "undefined correlations excluded; maps are rows=features, columns=time"
)


def format_cell(summary: Optional[MetricSummary]) -> str:
    return MISSING if summary is None else summary.format(3)


def _split(frame: pd.DataFrame) -> dict[str, pd.DataFrame]:
    protocol = protocol_of(frame)
    return {
        "consistency": frame.loc[protocol == "consistency"].reset_index(drop=True),
        "robustness": frame.loc[protocol == "robustness"].reset_index(drop=True),
    }


def correlation_table(frame: pd.DataFrame) -> pd.DataFrame:
    tau, rho = aggregate(frame, "tau"), aggregate(frame, "rho")
    rows = []
    for cell in tau:
        rows.append(
            {
                "dataset": cell[0],
                "model": cell[1],
                "explainer": cell[2],
                "kendall_tau": format_cell(tau[cell]),
                "pearson_rho": format_cell(rho[cell]),
                "n": int(((frame["dataset"] == cell[0]) & (frame["model"] == cell[1])
                          & (frame["explainer"] == cell[2])).sum()),
            }
        )
    return pd.DataFrame(rows, columns=["dataset", "model", "explainer", "kendall_tau", "pearson_rho", "n"])


def recall_table(frame: pd.DataFrame) -> pd.DataFrame:
    recall = recall_by_placement(frame)
    rows = []
    for cell, per_placement in recall.items():
        row = {"dataset": cell[0], "model": cell[1], "explainer": cell[2]}
        for p in PLACEMENTS:
            row[p.value] = format_cell(per_placement[p])
        rows.append(row)
    return pd.DataFrame(rows, columns=["dataset", "model", "explainer", *[p.value for p in PLACEMENTS]])


def report_tables(frame: pd.DataFrame) -> dict[str, pd.DataFrame]:
    tables: dict[str, pd.DataFrame] = {}
    for protocol, part in _split(frame).items():
        if part.empty:
            continue
        tables[f"{protocol}_table"] = correlation_table(part)
        tables[f"{protocol}_recall"] = recall_table(part)
    return tables


def model_order(frame: pd.DataFrame, explainer: str = "IG") -> pd.DataFrame:
    """Models ranked by mean consistency tau under one explainer, per dataset."""
    columns = ["dataset", "model", "mean_tau", "rank"]
    part = frame.loc[(protocol_of(frame) == "consistency") & (frame["explainer"] == explainer)]
    if part.empty:
        return pd.DataFrame(columns=columns)
    rows = [
        {"dataset": cell[0], "model": cell[1], "mean_tau": summary.mean if summary else float("nan")}
        for cell, summary in aggregate(part, "tau").items()
    ]
    table = pd.DataFrame(rows).sort_values(
        ["dataset", "mean_tau"], ascending=[True, False], na_position="last", kind="mergesort"
    )
    table["rank"] = table.groupby("dataset").cumcount() + 1
    return table[columns].reset_index(drop=True)


def leader_by_dataset(order: pd.DataFrame, model: str = LEADER) -> dict[str, bool | None]:
    """Whether ``model`` tops each dataset's ordering; ``None`` when there is nothing to compare."""
    out: dict[str, bool | None] = {}
    for dataset, part in order.groupby("dataset", sort=False):
        models = part["model"].tolist()
        out[dataset] = None if model not in models or len(models) < 2 else models[0] == model
    return out


def missing_count(table: pd.DataFrame) -> int:
    return int((table == MISSING).sum().sum())


def to_markdown(table: pd.DataFrame) -> str:
    columns = [str(c) for c in table.columns]
    lines = [
        "| " + " | ".join(columns) + " |",
        "|" + "|".join("---" for _ in columns) + "|",
    ]
    for row in table.itertuples(index=False):
        lines.append("| " + " | ".join(str(v) for v in row) + " |")
    return "\n".join(lines)


def render(table: pd.DataFrame, fmt: str, title: str = "") -> str:
    if fmt not in FORMATS:
        raise ConfigurationError(f"format must be one of {FORMATS}, got {fmt!r}")
    missing = missing_count(table)
    if fmt == "csv":
        text = table.to_csv(index=False)
        return text + f"# {MISSING} : no defined values ({missing} cells)\n" if missing else text
    parts = []
    if title:
        parts.append(f"### {title}")
    parts.append(f"_{HEADER_NOTE}_")
    parts.append(to_markdown(table))
    if missing:
        parts.append(f"{MISSING} : no defined values ({missing} cells)")
    return "\n\n".join(parts) + "\n"


def write_report(frame: pd.DataFrame, out_dir: str | Path, fmt: str = "csv") -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}
    for name, table in report_tables(frame).items():
        path = out / f"{name}.{fmt}"
        path.write_text(render(table, fmt, title=name.replace("_", " ")), encoding="utf-8")
        paths[name] = path
    coefficients = out / "coefficients.csv"
    coefficient_table(frame).to_csv(coefficients, index=False)
    paths["coefficients"] = coefficients
    order = model_order(frame)
    if not order.empty:
        paths["ig_consistency_order"] = out / "ig_consistency_order.csv"
        order.to_csv(paths["ig_consistency_order"], index=False)
    return paths


def map_row_sums(path: str | Path) -> pd.DataFrame:
    saliency = read_map(path)
    sums = saliency.row_sums()
    return pd.DataFrame(
        {
            "feature": list(range(len(sums))),
            "row_sum": sums,
            "signal_row": [n == saliency.signal_feature for n in range(len(sums))],
        }
    )
