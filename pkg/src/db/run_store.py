import hashlib
import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

from src.errors import DataError

logger = logging.getLogger(__name__)

# --- The run directory is the database ---
#
#   config.yaml
#   data/{train,val,val_neg,test}.npz, data/split_manifest.json, data/raw/ (synthetic scenes)
#   search/{history.jsonl, controller.pt, curve.csv, best_spec.json, best_spec.txt}
#   models/final.pt (+ final.txt)
#   samples/window_<index>.smp, samples/scores.npz
#   reports/*.csv, reports/*.json
#   plots/*.png


@dataclass(frozen=True)
class RunPaths:
    root: Path

    @property
    def config(self) -> Path:
        return self.root / "config.yaml"

    @property
    def data_dir(self) -> Path:
        return self.root / "data"

    def windows(self, part: str) -> Path:
        return self.data_dir / f"{part}.npz"

    @property
    def raw_dir(self) -> Path:
        return self.data_dir / "raw"

    @property
    def manifest(self) -> Path:
        return self.data_dir / "split_manifest.json"

    @property
    def search_dir(self) -> Path:
        return self.root / "search"

    @property
    def history(self) -> Path:
        return self.search_dir / "history.jsonl"

    @property
    def controller(self) -> Path:
        return self.search_dir / "controller.pt"

    @property
    def curve(self) -> Path:
        return self.search_dir / "curve.csv"

    @property
    def best_spec(self) -> Path:
        return self.search_dir / "best_spec.json"

    @property
    def final_model(self) -> Path:
        return self.root / "models" / "final.pt"

    @property
    def samples_dir(self) -> Path:
        return self.root / "samples"

    def sample_file(self, index: int) -> Path:
        return self.samples_dir / f"window_{index:05d}.smp"

    @property
    def scores(self) -> Path:
        return self.samples_dir / "scores.npz"

    @property
    def random_baseline(self) -> "RunPaths":
        """Run directory of the budget-matched random-search baseline."""
        return RunPaths(self.root / "random_search")

    def report(self, name: str) -> Path:
        return self.root / "reports" / name

    def plot(self, name: str) -> Path:
        return self.root / "plots" / name


# --- 1. Writes ---

def write_bytes_atomic(path: Path, data: bytes) -> Path:
    """Writes through a temporary file and a rename, so readers never see a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(data)
        f.flush()
        os.fsync(f.fileno())
    tmp.replace(path)
    return path


def write_text_atomic(path: Path, text: str) -> Path:
    return write_bytes_atomic(path, text.encode("utf-8"))


def write_json(path: Path, record: Any) -> Path:
    """Saves a JSON document with sorted keys."""
    return write_text_atomic(path, json.dumps(record, indent=2, sort_keys=True) + "\n")


def append_jsonl(path: Path, record: Dict[str, Any]) -> None:
    """Appends one record to a line-delimited log."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as f:
        f.write(json.dumps(record, sort_keys=True) + "\n")
        f.flush()
        os.fsync(f.fileno())


def rewrite_jsonl(path: Path, records: Iterable[Dict[str, Any]]) -> Path:
    return write_text_atomic(path, "".join(json.dumps(r, sort_keys=True) + "\n" for r in records))


# --- 2. Reads ---

def read_json(path: Path) -> Any:
    """Loads a JSON document, raising DataError when missing or malformed."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path} not found")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"{path} is not valid JSON: {e}")


def read_jsonl(path: Path) -> List[Dict[str, Any]]:
    """Loads every complete line; a torn final line from an interrupted append is dropped."""
    path = Path(path)
    if not path.exists():
        return []
    records = []
    lines = path.read_text(encoding="utf-8").splitlines()
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError:
            if number == len(lines):
                logger.warning(f"Dropping torn last line of {path}")
                break
            raise DataError(f"{path}:{number} is not valid JSON")
    return records


def sha256_of(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def require(path: Path, produced_by: Optional[str] = None) -> Path:
    """Returns `path` if it exists, otherwise raises DataError naming the command that makes it."""
    path = Path(path)
    if not path.exists():
        hint = f"; run `{produced_by}` first" if produced_by else ""
        raise DataError(f"{path} not found{hint}")
    return path
