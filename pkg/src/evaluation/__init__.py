from .metrics import (
    MetricSummary,
    kendall_tau,
    pearson_rho,
    recall_at_k,
    signal_row_share,
    summarize,
    time_profile,
    top_k_cells,
)
from .protocols import ProtocolConfig, choose_swap, consistency_eval, explain_frames, robustness_eval
from .records import (
    RECORD_COLUMNS,
    EvaluationRecord,
    aggregate,
    coefficient_table,
    read_records,
    recall_by_placement,
    records_frame,
    records_to_csv,
    write_records,
)

__all__ = [
    "RECORD_COLUMNS",
    "EvaluationRecord",
    "MetricSummary",
    "ProtocolConfig",
    "aggregate",
    "choose_swap",
    "coefficient_table",
    "consistency_eval",
    "explain_frames",
    "kendall_tau",
    "pearson_rho",
    "read_records",
    "recall_at_k",
    "recall_by_placement",
    "records_frame",
    "records_to_csv",
    "robustness_eval",
    "signal_row_share",
    "summarize",
    "time_profile",
    "top_k_cells",
    "write_records",
]
