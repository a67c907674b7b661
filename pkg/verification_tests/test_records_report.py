from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from common.errors import ParseError
from evaluation import (
    RECORD_COLUMNS,
    EvaluationRecord,
    aggregate,
    read_records,
    records_frame,
    records_to_csv,
    write_records,
)
from framing import Placement
from pipeline.report import (
    MISSING,
    correlation_table,
    leader_by_dataset,
    model_order,
    recall_table,
    render,
    report_tables,
    write_report,
)


def _record(window: str, comparison: str, tau, rho, recall=None) -> EvaluationRecord:
    return EvaluationRecord(
        dataset="IPD",
        model="LSTM",
        explainer="IG",
        window_id=window,
        comparison=comparison,
        tau=tau,
        rho=rho,
        recall=recall or {},
    )


def _consistency_records() -> list[EvaluationRecord]:
    recall = {Placement.TOP: 1.0, Placement.MIDDLE: 0.5, Placement.BOTTOM: 0.0}
    return [
        _record("w00000", "top-middle", 0.0, 0.2, recall),
        _record("w00000", "top-bottom", 1.0, None, recall),
        _record("w00000", "middle-bottom", 0.5, 0.4, recall),
    ]


def test_csv_header_and_missing_fields() -> None:
    text = records_to_csv(_consistency_records())
    lines = text.splitlines()
    assert lines[0] == ",".join(RECORD_COLUMNS)
    assert lines[0] == "dataset,model,explainer,window_id,comparison,tau,rho,recall_top,recall_middle,recall_bottom"
    assert lines[2] == "IPD,LSTM,IG,w00000,top-bottom,1.0,,1.0,0.5,0.0"


def test_records_file_round_trip(tmp_path: Path) -> None:
    path = write_records(_consistency_records(), tmp_path / "records.csv")
    frame = read_records(path)
    assert list(frame.columns) == RECORD_COLUMNS
    assert frame["tau"].tolist() == [0.0, 1.0, 0.5]
    assert np.isnan(frame.loc[1, "rho"])


def test_malformed_records_name_the_line(tmp_path: Path) -> None:
    path = write_records(_consistency_records(), tmp_path / "records.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    lines[2] = lines[2].replace("1.0,,", "high,,", 1)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    with pytest.raises(ParseError) as info:
        read_records(path)
    assert info.value.line == 3

    path.write_text(",".join(RECORD_COLUMNS) + "\nIPD,LSTM,IG,w1,top-middle,1.5,,,,\n", encoding="utf-8")
    with pytest.raises(ParseError, match="line 2"):
        read_records(path)


def test_record_rejects_out_of_range_values() -> None:
    with pytest.raises(ValueError):
        _record("w", "top-middle", 1.2, 0.0)
    with pytest.raises(ValueError):
        _record("w", "top-middle", 0.0, 0.0, {Placement.TOP: 1.5})


def test_correlation_cell_format() -> None:
    table = correlation_table(records_frame(_consistency_records()[:2]))
    assert table.loc[0, "kendall_tau"] == "0.500±0.500"
    assert table.loc[0, "pearson_rho"] == "0.200±0.000"
    assert table.loc[0, "n"] == 2


def test_aggregate_matches_two_pass_statistics() -> None:
    rng = np.random.default_rng(17)
    records, expected = [], {"LSTM": [], "TCN": []}
    for k in range(1000):
        model = "LSTM" if k % 3 else "TCN"
        tau = None if k % 17 == 0 else float(rng.uniform(-1.0, 1.0))
        records.append(EvaluationRecord("IPD", model, "FA", f"w{k:05d}", "top-middle", tau, 0.0))
        if tau is not None:
            expected[model].append(tau)
    summaries = aggregate(records_frame(records), "tau")
    for model, values in expected.items():
        mean = math.fsum(values) / len(values)
        std = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / len(values))
        cell = summaries[("IPD", model, "FA")]
        assert cell.count == len(values)
        assert cell.mean == pytest.approx(mean, rel=1e-12, abs=1e-13)
        assert cell.std == pytest.approx(std, rel=1e-12, abs=1e-13)


def test_undefined_cells_render_with_footnote() -> None:
    frame = records_frame([_record("w1", "top-middle", None, None), _record("w2", "top-middle", None, None)])
    assert aggregate(frame, "tau")[("IPD", "LSTM", "IG")] is None
    table = correlation_table(frame)
    assert table.loc[0, "kendall_tau"] == MISSING
    text = render(table, "md", title="consistency table")
    assert "| IPD | LSTM | IG | — | — | 2 |" in text
    assert "— : no defined values (2 cells)" in text
    assert "rows=features, columns=time" in text


def test_recall_counts_each_window_once() -> None:
    records = _consistency_records() + [
        _record("w00001", "top-middle", 0.1, 0.1, {Placement.TOP: 0.0, Placement.MIDDLE: 0.5, Placement.BOTTOM: 1.0})
    ]
    table = recall_table(records_frame(records))
    assert table.loc[0, "top"] == "0.500±0.500"
    assert table.loc[0, "middle"] == "0.500±0.000"


def test_report_tables_split_by_protocol(tmp_path: Path) -> None:
    records = _consistency_records() + [
        _record("w00000", "swap-1-3/middle", -0.2, -0.1, {Placement.MIDDLE: 1.0}),
    ]
    frame = records_frame(records)
    tables = report_tables(frame)
    assert set(tables) == {"consistency_table", "consistency_recall", "robustness_table", "robustness_recall"}
    assert tables["robustness_table"].loc[0, "kendall_tau"] == "-0.200±0.000"
    assert tables["robustness_recall"].loc[0, "top"] == MISSING

    paths = write_report(frame, tmp_path, "csv")
    coefficients = paths["coefficients"].read_text(encoding="utf-8").splitlines()
    assert coefficients[0] == "dataset,model,explainer,protocol,window_id,comparison,tau,rho,abs_tau,abs_rho"
    assert coefficients[-1].startswith("IPD,LSTM,IG,robustness,w00000,swap-1-3/middle,-0.2,-0.1,0.2,0.1")


def test_csv_render_counts_missing_cells() -> None:
    frame = records_frame([_record("w1", "top-middle", None, None), _record("w2", "top-middle", None, None)])
    text = render(correlation_table(frame), "csv")
    assert text.splitlines()[-1] == f"# {MISSING} : no defined values (2 cells)"
    defined = render(correlation_table(records_frame(_consistency_records())), "csv")
    assert "no defined values" not in defined


def test_model_order_ranks_consistency_by_mean_tau() -> None:
    records = []
    for model, taus in {"TCN": [0.1, 0.3], "LSTM": [0.7, 0.5], "Transformer": [0.5, 0.5]}.items():
        for k, tau in enumerate(taus):
            records.append(EvaluationRecord("IPD", model, "IG", f"w{k}", "top-middle", tau, 0.0))
            records.append(EvaluationRecord("IPD", model, "IG", f"w{k}", "swap-1-3/middle", 1.0, 1.0))
            records.append(EvaluationRecord("IPD", model, "FA", f"w{k}", "top-middle", -tau, 0.0))
    records += [
        EvaluationRecord("SYN", "LSTM", "IG", "w0", "top-middle", None, None),
        EvaluationRecord("SYN", "TCN", "IG", "w0", "top-middle", 0.2, 0.2),
    ]
    order = model_order(records_frame(records))
    ipd = order.loc[order["dataset"] == "IPD"]
    assert ipd["model"].tolist() == ["LSTM", "Transformer", "TCN"]
    assert ipd["rank"].tolist() == [1, 2, 3]
    assert ipd["mean_tau"].tolist() == pytest.approx([0.6, 0.5, 0.2])
    syn = order.loc[order["dataset"] == "SYN"]
    assert syn["model"].tolist() == ["TCN", "LSTM"]
    assert np.isnan(syn["mean_tau"].iloc[1])
    assert leader_by_dataset(order) == {"IPD": True, "SYN": False}
    assert leader_by_dataset(order, model="GRU") == {"IPD": None, "SYN": None}
    assert model_order(records_frame(records), explainer="FP").empty
