"""Detection and displacement metrics."""

from typing import Sequence

import numpy as np
from sklearn.metrics import roc_auc_score

from src.errors import ContractError


def auc(pos_scores: Sequence[float], neg_scores: Sequence[float]) -> float:
    """P(positive scores lower than negative), ties counting one half.

    Negatives are the anomalous class, so a higher score must mean "more anomalous".
    """
    pos = np.asarray(pos_scores, dtype=np.float64).ravel()
    neg = np.asarray(neg_scores, dtype=np.float64).ravel()
    if pos.size == 0 or neg.size == 0:
        raise ContractError(f"AUC needs both classes, got {pos.size} positive and {neg.size} negative scores")
    scores = np.concatenate([pos, neg])
    if not np.isfinite(scores).all():
        raise ContractError("AUC scores must be finite")
    labels = np.concatenate([np.zeros(pos.size), np.ones(neg.size)])
    return float(roc_auc_score(labels, scores))


def _displacements(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    pred, gt = np.asarray(pred, dtype=np.float64), np.asarray(gt, dtype=np.float64)
    if pred.shape[-2:] != gt.shape[-2:] or pred.shape[-1] != 2:
        raise ContractError(f"prediction {pred.shape} and ground truth {gt.shape} do not match")
    return np.linalg.norm(pred - gt, axis=-1)


def ade(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """Mean Euclidean distance over frames; leading axes broadcast (e.g. samples x pedestrians)."""
    return _displacements(pred, gt).mean(axis=-1)


def fde(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """Euclidean distance at the final frame."""
    return _displacements(pred, gt)[..., -1]
