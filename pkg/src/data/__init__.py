from .trajectories import (
    DatasetSplit,
    NegativeWindow,
    RawTrackTable,
    TrajectoryWindow,
    frame_step,
    leave_one_out_split,
    load_negatives,
    load_raw_scene,
    load_windows,
    make_negatives,
    save_raw_scene,
    save_windows,
    window_scenes,
    windows_digest,
)
from .synthetic import make_synthetic_scenes, make_synthetic_windows

__all__ = [
    "DatasetSplit",
    "NegativeWindow",
    "RawTrackTable",
    "TrajectoryWindow",
    "frame_step",
    "leave_one_out_split",
    "load_negatives",
    "load_raw_scene",
    "load_windows",
    "make_negatives",
    "save_raw_scene",
    "save_windows",
    "window_scenes",
    "windows_digest",
    "make_synthetic_scenes",
    "make_synthetic_windows",
]
