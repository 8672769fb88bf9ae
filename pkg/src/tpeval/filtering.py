"""Anomaly-score matrices, per-pedestrian top-ψ selection and Best / Average / Worst aggregation."""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.errors import ContractError, NumericError
from src.schemas.pydantic_schemas import BestMode, MetricReport, WorstMode
from src.tpeval.metrics import ade, fde

logger = logging.getLogger(__name__)

Scorer = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SampleSet:
    """Ψ stochastic predictions of one window: Ψ x N x t_pred x 2."""
    samples: np.ndarray
    source: str = "unknown"

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 4 or samples.shape[-1] != 2 or samples.shape[0] < 1:
            raise ContractError(f"sample set must be Ψ x N x t_pred x 2 with Ψ >= 1, got {samples.shape}")
        if not np.isfinite(samples).all():
            raise ContractError("sample set contains non-finite coordinates")
        object.__setattr__(self, "samples", samples)

    @property
    def num_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def num_pedestrians(self) -> int:
        return self.samples.shape[1]

    def head(self, count: int) -> "SampleSet":
        """The first `count` samples."""
        return SampleSet(self.samples[:count], self.source)


# --- 1. Scoring and selection ---

def score_matrix(scorer, samples: SampleSet, history: np.ndarray) -> np.ndarray:
    """N x Ψ matrix; column j scores sample j. `scorer` is a model or a (future, history) callable."""
    score = scorer.score if hasattr(scorer, "score") else scorer
    columns = [np.asarray(score(sample, history), dtype=np.float64) for sample in samples.samples]
    matrix = np.stack(columns, axis=1)
    if matrix.shape != (samples.num_pedestrians, samples.num_samples):
        raise ContractError(f"scorer returned {matrix.shape}, expected {(samples.num_pedestrians, samples.num_samples)}")
    if not np.isfinite(matrix).all():
        raise NumericError("anomaly score matrix contains non-finite entries")
    return matrix


def topk_filter(matrix: np.ndarray, psi: int) -> np.ndarray:
    """Indices of the ψ lowest scores in every row; ties go to the lower sample index."""
    num_samples = matrix.shape[1]
    if not 1 <= psi <= num_samples:
        raise ContractError(f"ψ={psi} must lie in 1..Ψ={num_samples}")
    return np.argsort(matrix, axis=1, kind="stable")[:, :psi]


def oracle_scorer(truth: np.ndarray) -> Scorer:
    """Scores a sample by its true per-pedestrian ADE."""
    return lambda future, history: ade(future, truth)


# --- 2. Aggregation ---

def _retained_sample_means(errors: np.ndarray, selection: np.ndarray) -> np.ndarray:
    """Mean error of every sample over the pedestrians that retained it."""
    mask = np.zeros_like(errors, dtype=bool)
    np.put_along_axis(mask, selection, True, axis=1)
    counts = mask.sum(axis=0)
    sums = np.where(mask, errors, 0.0).sum(axis=0)
    kept = counts > 0
    return sums[kept] / counts[kept]


def _summarise(errors: np.ndarray, selection: np.ndarray, best_mode: BestMode, worst_mode: WorstMode):
    selected = np.take_along_axis(errors, selection, axis=1)
    per_sample = _retained_sample_means(errors, selection)
    average = selected.mean(axis=1).mean()
    best = selected.min(axis=1).mean() if best_mode == BestMode.ASSEMBLED else per_sample.min()
    worst = per_sample.max() if worst_mode == WorstMode.SAMPLE else selected.max(axis=1).mean()
    return float(best), float(average), float(worst)


def aggregate(
    samples: SampleSet,
    truth: np.ndarray,
    selection: Optional[np.ndarray] = None,
    best_mode: BestMode = BestMode.ASSEMBLED,
    worst_mode: WorstMode = WorstMode.SAMPLE,
) -> MetricReport:
    """Best / Average / Worst ADE and FDE over the selected (default: all) samples.

    Average: per-pedestrian mean over its selected samples, then mean over pedestrians.
    Best (assembled): per-pedestrian minimum, then mean. Worst (sample): the worst whole sample.
    """
    ade_errors = ade(samples.samples, truth).T  # N x Ψ
    fde_errors = fde(samples.samples, truth).T
    if selection is None:
        selection = np.tile(np.arange(samples.num_samples), (samples.num_pedestrians, 1))
    best_ade, average_ade, worst_ade = _summarise(ade_errors, selection, best_mode, worst_mode)
    best_fde, average_fde, worst_fde = _summarise(fde_errors, selection, best_mode, worst_mode)
    return MetricReport(
        best_ade=best_ade, best_fde=best_fde,
        average_ade=average_ade, average_fde=average_fde,
        worst_ade=worst_ade, worst_fde=worst_fde,
    )


def combine_reports(reports: Sequence[MetricReport], weights: Optional[Sequence[float]] = None) -> MetricReport:
    """Weighted mean of per-window reports (weights are usually pedestrian counts)."""
    if not reports:
        raise ContractError("no reports to combine")
    frame = pd.DataFrame([r.model_dump() for r in reports])
    w = np.ones(len(reports)) if weights is None else np.asarray(weights, dtype=np.float64)
    return MetricReport(**{col: float(np.average(frame[col], weights=w)) for col in frame.columns})


# --- 3. Per-window evaluation and sensitivity sweeps ---

@dataclass
class WindowEvaluation:
    """One held-out window: its samples, ground-truth future and N x Ψ score matrix."""
    samples: SampleSet
    truth: np.ndarray
    scores: np.ndarray

    def head(self, count: int) -> "WindowEvaluation":
        return WindowEvaluation(self.samples.head(count), self.truth, self.scores[:, :count])


def evaluate_window(
    evaluation: WindowEvaluation,
    psi: int,
    best_mode: BestMode = BestMode.ASSEMBLED,
    worst_mode: WorstMode = WorstMode.SAMPLE,
) -> Tuple[MetricReport, MetricReport]:
    """(unfiltered, top-ψ filtered) reports of one window."""
    selection = topk_filter(evaluation.scores, psi)
    full = aggregate(evaluation.samples, evaluation.truth, None, best_mode, worst_mode)
    filtered = aggregate(evaluation.samples, evaluation.truth, selection, best_mode, worst_mode)
    return full, filtered


def evaluate_scene(
    evaluations: Sequence[WindowEvaluation],
    psi: int,
    best_mode: BestMode = BestMode.ASSEMBLED,
    worst_mode: WorstMode = WorstMode.SAMPLE,
) -> Tuple[MetricReport, MetricReport]:
    """Pedestrian-weighted (unfiltered, filtered) reports over all windows of a scene."""
    pairs = [evaluate_window(e, psi, best_mode, worst_mode) for e in evaluations]
    weights = [e.samples.num_pedestrians for e in evaluations]
    return (
        combine_reports([full for full, _ in pairs], weights),
        combine_reports([filtered for _, filtered in pairs], weights),
    )


def psi_sweep(
    evaluations: Sequence[WindowEvaluation],
    psi_values: Iterable[int],
    best_mode: BestMode = BestMode.ASSEMBLED,
    worst_mode: WorstMode = WorstMode.SAMPLE,
) -> pd.DataFrame:
    """Filtered metrics for each ψ; values above Ψ are skipped."""
    num_samples = min(e.samples.num_samples for e in evaluations)
    rows = []
    for psi in psi_values:
        if psi > num_samples:
            logger.warning(f"Skipping ψ={psi}: only {num_samples} samples per window")
            continue
        _, filtered = evaluate_scene(evaluations, psi, best_mode, worst_mode)
        rows.append({"psi": psi, **filtered.model_dump()})
    return pd.DataFrame(rows)


def num_samples_sweep(
    evaluations: Sequence[WindowEvaluation],
    sample_counts: Iterable[int],
    psi: int,
    best_mode: BestMode = BestMode.ASSEMBLED,
    worst_mode: WorstMode = WorstMode.SAMPLE,
) -> pd.DataFrame:
    """Unfiltered and top-ψ metrics when only the first Ψ samples of each window exist."""
    available = min(e.samples.num_samples for e in evaluations)
    rows = []
    for count in sample_counts:
        if count > available or count < psi:
            logger.warning(f"Skipping Ψ={count}: need {psi} <= Ψ <= {available}")
            continue
        full, filtered = evaluate_scene([e.head(count) for e in evaluations], psi, best_mode, worst_mode)
        rows.append({
            "num_samples": count,
            **{f"all_{k}": v for k, v in full.model_dump().items()},
            **{f"top_{k}": v for k, v in filtered.model_dump().items()},
        })
    return pd.DataFrame(rows)


def filtering_win_rate(evaluations: Sequence[WindowEvaluation], psi: int) -> float:
    """Share of windows whose filtered Average ADE is no worse than the unfiltered one."""
    wins = []
    for evaluation in evaluations:
        full, filtered = evaluate_window(evaluation, psi)
        wins.append(filtered.average_ade <= full.average_ade)
    return float(np.mean(wins))


def per_window_reports(evaluations: Sequence[WindowEvaluation], psi: int) -> List[Dict[str, float]]:
    rows = []
    for index, evaluation in enumerate(evaluations):
        full, filtered = evaluate_window(evaluation, psi)
        rows.append({
            "window": index,
            "pedestrians": evaluation.samples.num_pedestrians,
            **{f"all_{k}": v for k, v in full.model_dump().items()},
            **{f"top_{k}": v for k, v in filtered.model_dump().items()},
        })
    return rows
