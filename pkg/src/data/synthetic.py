"""Synthetic pedestrian scenes for demos and tests when no dataset files are configured."""

import logging
from typing import Dict, List

import numpy as np

from src.data.trajectories import RawTrackTable, TrajectoryWindow

logger = logging.getLogger(__name__)

FRAME_INTERVAL = 0.4  # seconds between annotated frames
FRAME_STRIDE = 10  # frame-id step between annotated frames, as in the ETH recordings


def _walk(rng: np.random.Generator, steps: int, max_turn: float) -> np.ndarray:
    """One smooth track: constant speed, constant small turn rate."""
    start = rng.uniform(-6.0, 6.0, size=2)
    heading = rng.uniform(0.0, 2.0 * np.pi)
    speed = rng.uniform(0.8, 1.5) * FRAME_INTERVAL
    turn = rng.uniform(-max_turn, max_turn)
    headings = heading + turn * np.arange(steps)
    steps_xy = speed * np.stack([np.cos(headings), np.sin(headings)], axis=1)
    return start + np.vstack([np.zeros(2), np.cumsum(steps_xy[:-1], axis=0)])


def make_synthetic_scenes(
    n_scenes: int = 5,
    n_frames: int = 80,
    n_pedestrians: int = 6,
    seed: int = 0,
    max_turn: float = 0.06,
) -> Dict[str, RawTrackTable]:
    """Populate `n_scenes` scenes with pedestrians entering and leaving at random frames."""
    rng = np.random.default_rng(seed)
    scenes: Dict[str, RawTrackTable] = {}
    for s in range(n_scenes):
        rows = []
        for ped in range(1, n_pedestrians + 1):
            lifetime = int(rng.integers(24, n_frames + 1))
            entry = int(rng.integers(0, n_frames - lifetime + 1))
            track = _walk(rng, lifetime, max_turn)
            for k, (x, y) in enumerate(track):
                rows.append(((entry + k) * FRAME_STRIDE, ped, x, y))
        rows.sort()
        name = f"synth_{s}"
        scenes[name] = RawTrackTable(rows=np.asarray(rows, dtype=np.float64), scene_name=name)
    logger.info(f"Generated {n_scenes} synthetic scenes with {n_pedestrians} pedestrians each")
    return scenes


def make_synthetic_windows(
    count: int,
    n_pedestrians: int = 3,
    seed: int = 0,
    t_obs: int = 8,
    t_pred: int = 12,
    max_turn: float = 0.06,
) -> List[TrajectoryWindow]:
    """Windows cut straight from smooth tracks; `max_turn=0` gives constant-velocity motion."""
    rng = np.random.default_rng(seed)
    windows = []
    for i in range(count):
        tracks = np.stack([_walk(rng, t_obs + t_pred, max_turn) for _ in range(n_pedestrians)])
        windows.append(TrajectoryWindow(
            history=tracks[:, :t_obs],
            future=tracks[:, t_obs:],
            pedestrian_ids=tuple(range(1, n_pedestrians + 1)),
            scene_name="synthetic",
            start_frame=i * FRAME_STRIDE,
        ))
    return windows
