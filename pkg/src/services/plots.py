"""Figures written from report data; the Agg backend never opens a window."""

import logging
from pathlib import Path
from typing import Dict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

logger = logging.getLogger(__name__)


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)
    logger.info(f"Wrote {path}")
    return path


def plot_search_curves(curves: Dict[str, pd.DataFrame], path: Path) -> Path:
    """Best-so-far validation AUC against wall time, one line per strategy."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for strategy, frame in sorted(curves.items()):
        ax.step(frame["wall_time"], frame["best_reward"], where="post", label=strategy)
    ax.set_xlabel("wall time (s)")
    ax.set_ylabel("best validation AUC")
    ax.grid(alpha=0.3)
    ax.legend()
    return _save(fig, path)


def plot_score_histogram(positives: np.ndarray, negatives: np.ndarray, path: Path, bins: int = 40) -> Path:
    """Per-pedestrian anomaly scores of ground-truth and perturbed futures."""
    fig, ax = plt.subplots(figsize=(6, 4))
    edges = np.histogram_bin_edges(np.concatenate([positives, negatives]), bins=bins)
    ax.hist(positives, bins=edges, alpha=0.6, label="ground truth")
    ax.hist(negatives, bins=edges, alpha=0.6, label="perturbed")
    ax.set_xlabel("anomaly score")
    ax.set_ylabel("pedestrians")
    ax.legend()
    return _save(fig, path)
