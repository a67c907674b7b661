from .commands import (
    cmd_eval_consistency,
    cmd_eval_robustness,
    cmd_explain,
    cmd_ingest,
    cmd_report,
    cmd_run,
    cmd_train,
    resolve_config,
)
from .config import DatasetSpec, ExperimentConfig, ModelSettings
from .report import format_cell, map_row_sums, render, report_tables, write_report
from .runner import ReportBundle, load_dataset, run_experiment, train_or_load

__all__ = [
    "DatasetSpec",
    "ExperimentConfig",
    "ModelSettings",
    "ReportBundle",
    "cmd_eval_consistency",
    "cmd_eval_robustness",
    "cmd_explain",
    "cmd_ingest",
    "cmd_report",
    "cmd_run",
    "cmd_train",
    "format_cell",
    "load_dataset",
    "map_row_sums",
    "render",
    "report_tables",
    "resolve_config",
    "run_experiment",
    "train_or_load",
    "write_report",
]
