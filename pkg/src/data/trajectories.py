"""Raw scene ingestion, fixed-length windows, leave-one-out splits and negative samples."""

import hashlib
import itertools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import ConfigurationError, ContractError, DataError, EmptyInputError, FormatError, ParseError

logger = logging.getLogger(__name__)

WINDOWS_FORMAT_VERSION = 1
DEFAULT_COLUMNS = "frame ped x y"
_COLUMN_NAMES = ("frame", "ped", "x", "y")


# --- Domain types ---

@dataclass(frozen=True)
class RawTrackTable:
    """Observations of one scene; `rows` columns are (frame_id, pedestrian_id, x, y)."""
    rows: np.ndarray
    scene_name: str

    def __len__(self) -> int:
        return int(self.rows.shape[0])

    @property
    def pedestrian_ids(self) -> List[int]:
        return sorted({int(p) for p in self.rows[:, 1]})


@dataclass(frozen=True)
class TrajectoryWindow:
    """N pedestrians fully present over t_obs observed + t_pred future frames."""
    history: np.ndarray
    future: np.ndarray
    pedestrian_ids: Tuple[int, ...]
    scene_name: str = ""
    start_frame: int = 0

    def __post_init__(self):
        if self.history.ndim != 3 or self.history.shape[2] != 2:
            raise ContractError(f"history must be N x t_obs x 2, got {self.history.shape}")
        if self.future.ndim != 3 or self.future.shape[2] != 2:
            raise ContractError(f"future must be N x t_pred x 2, got {self.future.shape}")
        if self.history.shape[0] != self.future.shape[0] or self.history.shape[0] < 1:
            raise ContractError(f"window needs N >= 1 matching rows, got {self.history.shape[0]} / {self.future.shape[0]}")
        if len(self.pedestrian_ids) != self.history.shape[0]:
            raise ContractError("one pedestrian id per row required")
        if not (np.isfinite(self.history).all() and np.isfinite(self.future).all()):
            raise ContractError("window coordinates must be finite")

    @property
    def num_pedestrians(self) -> int:
        return int(self.history.shape[0])

    @property
    def t_obs(self) -> int:
        return int(self.history.shape[1])

    @property
    def t_pred(self) -> int:
        return int(self.future.shape[1])


@dataclass(frozen=True)
class NegativeWindow:
    """A window whose future was perturbed by bounded uniform noise."""
    base: TrajectoryWindow
    future: np.ndarray
    noise_bound: float

    @property
    def history(self) -> np.ndarray:
        return self.base.history


@dataclass
class DatasetSplit:
    train: List[TrajectoryWindow]
    val: List[TrajectoryWindow]
    val_neg: List[NegativeWindow]
    held_out_scene: str
    # Windows of the held-out scene, reserved for prediction filtering
    test: List[TrajectoryWindow] = field(default_factory=list)


# --- Raw scene files ---

def _parse_columns(columns: str) -> Dict[str, int]:
    tokens = columns.split()
    positions = {name: i for i, name in enumerate(tokens) if name != "_"}
    missing = [name for name in _COLUMN_NAMES if name not in positions]
    unknown = [name for name in positions if name not in _COLUMN_NAMES]
    if missing or unknown:
        raise ConfigurationError(
            f"column descriptor {columns!r} must name frame, ped, x, y once each ('_' skips a field)"
        )
    return positions


def _as_id(value: float, what: str, path: Path, lineno: int) -> int:
    if not math.isfinite(value) or not float(value).is_integer():
        raise ParseError(f"{path}:{lineno}: {what} must be an integer, got {value}")
    return int(value)


def load_raw_scene(path, columns: str = DEFAULT_COLUMNS, scene_name: Optional[str] = None) -> RawTrackTable:
    """Parse a whitespace-separated track file; '#' starts a comment line."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"scene file not found: {path}")
    positions = _parse_columns(columns)
    width = max(max(positions.values()) + 1, 4)

    rows: List[Tuple[int, int, float, float]] = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            fields = stripped.replace(",", " ").split()
            if len(fields) < width:
                raise ParseError(f"{path}:{lineno}: expected at least {width} numeric fields, got {len(fields)}")
            try:
                values = [float(v) for v in fields]
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: non-numeric field ({exc})") from exc
            x, y = values[positions["x"]], values[positions["y"]]
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ParseError(f"{path}:{lineno}: coordinates must be finite, got ({x}, {y})")
            frame = _as_id(values[positions["frame"]], "frame id", path, lineno)
            ped = _as_id(values[positions["ped"]], "pedestrian id", path, lineno)
            if (frame, ped) in seen:
                raise ParseError(f"{path}:{lineno}: duplicate observation of pedestrian {ped} at frame {frame}")
            seen.add((frame, ped))
            rows.append((frame, ped, x, y))

    if not rows:
        raise EmptyInputError(f"{path}: no observations")
    table = np.asarray(rows, dtype=np.float64)
    logger.info(f"Loaded {len(rows)} observations from {path}")
    return RawTrackTable(rows=table, scene_name=scene_name or path.stem)


def save_raw_scene(table: RawTrackTable, path, columns: str = DEFAULT_COLUMNS) -> None:
    _parse_columns(columns)
    tokens = columns.split()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# scene {table.scene_name}\n")
        for frame, ped, x, y in table.rows:
            values = {"frame": str(int(frame)), "ped": str(int(ped)), "x": repr(float(x)), "y": repr(float(y))}
            fh.write(" ".join("0" if name == "_" else values[name] for name in tokens) + "\n")


# --- Windows ---

def frame_step(frames: np.ndarray) -> int:
    """Annotation step of a scene: the gcd of the gaps between its distinct frame ids."""
    gaps = np.diff(np.unique(frames).astype(np.int64))
    return int(np.gcd.reduce(gaps)) if len(gaps) else 1


def window_scenes(table: RawTrackTable, t_obs: int = 8, t_pred: int = 12, stride: int = 1) -> List[TrajectoryWindow]:
    """Cut t_obs + t_pred windows over the scene's sorted distinct frames.

    A window covers consecutive frames of the scene's annotation step; starts whose frames
    span a hole in the recording are skipped. Only pedestrians present at every frame of a
    window are kept; windows without any such pedestrian are dropped.
    """
    if stride < 1:
        raise ContractError(f"stride must be >= 1, got {stride}")
    seq_len = t_obs + t_pred
    frames = np.unique(table.rows[:, 0]).astype(np.int64)
    frame_index = {int(f): i for i, f in enumerate(frames)}
    step = frame_step(frames)

    tracks: Dict[int, Dict[int, np.ndarray]] = {}
    for frame, ped, x, y in table.rows:
        tracks.setdefault(int(ped), {})[frame_index[int(frame)]] = np.array([x, y])

    windows: List[TrajectoryWindow] = []
    skipped = 0
    for start in range(0, len(frames) - seq_len + 1, stride):
        if frames[start + seq_len - 1] - frames[start] != (seq_len - 1) * step:
            skipped += 1
            continue
        span = range(start, start + seq_len)
        peds = sorted(p for p, track in tracks.items() if all(k in track for k in span))
        if not peds:
            continue
        coords = np.stack([np.stack([tracks[p][k] for k in span]) for p in peds])
        windows.append(TrajectoryWindow(
            history=coords[:, :t_obs].copy(),
            future=coords[:, t_obs:].copy(),
            pedestrian_ids=tuple(peds),
            scene_name=table.scene_name,
            start_frame=int(frames[start]),
        ))
    if skipped:
        logger.info(f"Scene {table.scene_name}: skipped {skipped} starts spanning gaps in the frame ids")
    logger.info(f"Scene {table.scene_name}: {len(windows)} windows of {seq_len} frames")
    return windows


def _tail_sizes(sizes: Sequence[int], total: int) -> List[int]:
    """Split `total` over scenes proportionally to `sizes` (largest remainder).

    A scene keeps at least one training window unless the others cannot cover `total`.
    """
    quotas = [total * s / sum(sizes) for s in sizes]
    counts = [min(int(q), max(s - 1, 0)) for q, s in zip(quotas, sizes)]
    by_remainder = sorted(range(len(sizes)), key=lambda i: (-(quotas[i] - int(quotas[i])), i))
    for reserve in (1, 0):
        for i in itertools.cycle(by_remainder):
            if sum(counts) == total or all(counts[j] >= sizes[j] - reserve for j in by_remainder):
                break
            if counts[i] < sizes[i] - reserve:
                counts[i] += 1
    return counts


def leave_one_out_split(
    scenes: Dict[str, List[TrajectoryWindow]],
    held_out: str,
    val_fraction: float = 0.2,
    seed: int = 0,
    noise_bound: float = 0.1,
) -> DatasetSplit:
    """Train/val from every scene but `held_out`; the held-out scene becomes `test`.

    Validation is the time-ordered tail of each remaining scene, so overlapping windows of
    one track do not land on both sides of the split. `seed` drives the negatives only.
    """
    if held_out not in scenes:
        raise ConfigurationError(f"unknown held-out scene {held_out!r}; known: {sorted(scenes)}")
    if not 0.0 < val_fraction < 1.0:
        raise ConfigurationError(f"val_fraction must be in (0, 1), got {val_fraction}")

    ordered = [
        sorted(scenes[name], key=lambda w: w.start_frame) for name in sorted(scenes) if name != held_out
    ]
    ordered = [windows for windows in ordered if windows]
    pool_size = sum(len(windows) for windows in ordered)
    if pool_size < 2:
        raise DataError(f"need at least 2 windows outside {held_out!r}, got {pool_size}")
    n_val = min(max(int(round(pool_size * val_fraction)), 1), pool_size - 1)
    tails = _tail_sizes([len(windows) for windows in ordered], n_val)
    train = [w for windows, n in zip(ordered, tails) for w in windows[: len(windows) - n]]
    val = [w for windows, n in zip(ordered, tails) for w in windows[len(windows) - n:]]
    return DatasetSplit(
        train=train,
        val=val,
        val_neg=make_negatives(val, noise_bound=noise_bound, seed=seed),
        held_out_scene=held_out,
        test=list(scenes[held_out]),
    )


def make_negatives(windows: Sequence[TrajectoryWindow], noise_bound: float = 0.1, seed: int = 0) -> List[NegativeWindow]:
    """Perturb every future coordinate by an independent U(-noise_bound, noise_bound) draw."""
    if not noise_bound > 0:
        raise ContractError(f"noise_bound must be > 0, got {noise_bound}")
    rng = np.random.default_rng(seed)
    negatives = []
    for window in windows:
        perturbed = window.future + rng.uniform(-noise_bound, noise_bound, size=window.future.shape)
        while np.array_equal(perturbed, window.future):
            perturbed = window.future + rng.uniform(-noise_bound, noise_bound, size=window.future.shape)
        negatives.append(NegativeWindow(base=window, future=perturbed, noise_bound=noise_bound))
    return negatives


# --- Windows cache ---

def save_windows(windows: Sequence[TrajectoryWindow], path, futures: Optional[Sequence[np.ndarray]] = None) -> None:
    """Write windows to a compressed .npz; `futures` replaces each window's future (negatives)."""
    if not windows:
        raise ContractError("cannot cache an empty window list")
    t_obs, t_pred = windows[0].t_obs, windows[0].t_pred
    futures = list(futures) if futures is not None else [w.future for w in windows]
    offsets = np.cumsum([0] + [w.num_pedestrians for w in windows])
    np.savez_compressed(
        path,
        format_version=np.array(WINDOWS_FORMAT_VERSION),
        t_obs=np.array(t_obs),
        t_pred=np.array(t_pred),
        offsets=offsets,
        history=np.concatenate([w.history for w in windows]),
        future=np.concatenate(futures),
        pedestrian_ids=np.concatenate([np.asarray(w.pedestrian_ids, dtype=np.int64) for w in windows]),
        scene_names=np.array([w.scene_name for w in windows]),
        start_frames=np.array([w.start_frame for w in windows], dtype=np.int64),
    )


def load_windows(path) -> List[TrajectoryWindow]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"windows cache not found: {path}")
    with np.load(path) as blob:
        version = int(blob["format_version"])
        if version != WINDOWS_FORMAT_VERSION:
            raise FormatError(f"{path}: format version {version}, expected {WINDOWS_FORMAT_VERSION}")
        t_obs, t_pred = int(blob["t_obs"]), int(blob["t_pred"])
        history, future, offsets = blob["history"], blob["future"], blob["offsets"]
        if history.shape[1:] != (t_obs, 2) or future.shape[1:] != (t_pred, 2) or offsets[-1] != len(history):
            raise FormatError(f"{path}: arrays disagree with header (t_obs={t_obs}, t_pred={t_pred})")
        ids, names, starts = blob["pedestrian_ids"], blob["scene_names"], blob["start_frames"]
        return [
            TrajectoryWindow(
                history=history[a:b].copy(),
                future=future[a:b].copy(),
                pedestrian_ids=tuple(int(p) for p in ids[a:b]),
                scene_name=str(names[i]),
                start_frame=int(starts[i]),
            )
            for i, (a, b) in enumerate(zip(offsets[:-1], offsets[1:]))
        ]


def load_negatives(path, base_windows: Sequence[TrajectoryWindow], noise_bound: float) -> List[NegativeWindow]:
    """Re-attach cached perturbed futures to the validation windows they were drawn from."""
    cached = load_windows(path)
    if len(cached) != len(base_windows):
        raise FormatError(f"{path}: {len(cached)} negatives for {len(base_windows)} validation windows")
    return [NegativeWindow(base=b, future=c.future, noise_bound=noise_bound) for b, c in zip(base_windows, cached)]


def windows_digest(path) -> str:
    """sha256 over the cached arrays in key order; stable across re-writes of identical windows."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"windows cache not found: {path}")
    digest = hashlib.sha256()
    with np.load(path) as blob:
        for key in sorted(blob.files):
            array = blob[key]
            digest.update(key.encode("utf-8"))
            digest.update(str(array.dtype).encode("utf-8") + str(array.shape).encode("utf-8"))
            digest.update(np.ascontiguousarray(array).tobytes())
    return digest.hexdigest()
