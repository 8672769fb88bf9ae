from .metrics import ade, auc, fde
from .filtering import (
    SampleSet,
    WindowEvaluation,
    aggregate,
    combine_reports,
    evaluate_scene,
    evaluate_window,
    filtering_win_rate,
    num_samples_sweep,
    oracle_scorer,
    per_window_reports,
    psi_sweep,
    score_matrix,
    topk_filter,
)
from .reports import auc_table, format_cell, format_report_table, merge_auc_tables, metric_rows, write_table

__all__ = [
    "ade",
    "auc",
    "fde",
    "SampleSet",
    "WindowEvaluation",
    "aggregate",
    "combine_reports",
    "evaluate_scene",
    "evaluate_window",
    "filtering_win_rate",
    "num_samples_sweep",
    "oracle_scorer",
    "per_window_reports",
    "psi_sweep",
    "score_matrix",
    "topk_filter",
    "auc_table",
    "format_cell",
    "format_report_table",
    "merge_auc_tables",
    "metric_rows",
    "write_table",
]
