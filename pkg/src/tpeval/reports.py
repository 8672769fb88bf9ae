"""Comma-separated report tables: rows model x metric kind, columns scene."""

import logging
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import pandas as pd

from src.db.run_store import write_text_atomic
from src.errors import ConfigurationError, ContractError
from src.schemas.pydantic_schemas import MetricReport

logger = logging.getLogger(__name__)

KINDS = ("best", "average", "worst")
AVERAGE_COLUMN = "Average"


def format_cell(ade_value: float, fde_value: float) -> str:
    return f"{ade_value:.2f} / {fde_value:.2f}"


def metric_rows(model: str, full: MetricReport, filtered: MetricReport, psi: int) -> List[Tuple[str, str, str]]:
    """(model, metric kind, "ADE / FDE") rows, unfiltered kinds first, then the top-ψ ones."""
    rows = []
    for kind in KINDS:
        rows.append((model, kind.capitalize(), format_cell(getattr(full, f"{kind}_ade"), getattr(full, f"{kind}_fde"))))
    for kind in KINDS:
        label = f"{kind.capitalize()} (TPAD Top-{psi})"
        rows.append((model, label, format_cell(getattr(filtered, f"{kind}_ade"), getattr(filtered, f"{kind}_fde"))))
    return rows


def format_report_table(rows: Sequence[Tuple[str, str, str]], scene: str) -> pd.DataFrame:
    frame = pd.DataFrame(rows, columns=["model", "metric", scene])
    return frame.set_index(["model", "metric"])


def auc_table(aucs: Dict[str, float], scene: str) -> pd.DataFrame:
    """Rows: model; one column per held-out scene."""
    frame = pd.DataFrame({"model": list(aucs), scene: [round(v, 4) for v in aucs.values()]})
    return frame.set_index("model")


def merge_auc_tables(tables: Sequence[pd.DataFrame]) -> pd.DataFrame:
    """Outer-join per-scene AUC tables on model; "Average" is the mean over the scenes a model has."""
    if not tables:
        raise ContractError("no AUC tables to merge")
    merged = pd.concat([t.drop(columns=AVERAGE_COLUMN, errors="ignore") for t in tables], axis=1, sort=False)
    repeated = sorted(set(merged.columns[merged.columns.duplicated()]))
    if repeated:
        raise ConfigurationError(f"scene(s) {repeated} appear in more than one AUC table")
    merged[AVERAGE_COLUMN] = merged.mean(axis=1, skipna=True).round(4)
    merged.index.name = "model"
    return merged


def write_table(frame: pd.DataFrame, path: Path) -> Path:
    write_text_atomic(path, frame.to_csv(float_format="%.6g"))
    logger.info(f"Wrote {path}")
    return path
