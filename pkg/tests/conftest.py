import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from src.data.synthetic import make_synthetic_windows  # noqa: E402
from src.schemas.pydantic_schemas import RunConfig  # noqa: E402


@pytest.fixture
def tiny_config(tmp_path):
    """A run small enough for the whole pipeline to finish in seconds."""
    return RunConfig(
        run_dir=str(tmp_path / "run"),
        synthetic_scenes=3,
        synthetic_frames=40,
        synthetic_pedestrians=3,
        budget=3,
        embedding_size=16,
        hidden_size=16,
        hidden_dim=8,
        candidate_epochs=1,
        final_epochs=1,
        memory_size=4,
        n_clusters=3,
        num_samples=12,
        top_k=4,
        psi_sweep=[2, 4, 8],
        num_samples_sweep=[8, 12],
        sampler_epochs=1,
    )


@pytest.fixture
def windows():
    return make_synthetic_windows(6, n_pedestrians=3, seed=1)
