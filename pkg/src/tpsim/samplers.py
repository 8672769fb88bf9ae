"""Stochastic trajectory predictors producing Ψ samples per window, and the sample file format."""

import json
import logging
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from tqdm import tqdm

from src.data.trajectories import TrajectoryWindow
from src.db.run_store import write_bytes_atomic
from src.errors import ContractError, DataError, FormatError
from src.schemas.pydantic_schemas import SamplerConfig, SamplerKind
from src.tpeval.filtering import SampleSet

logger = logging.getLogger(__name__)

SAMPLE_FORMAT_VERSION = 1


# --- 1. Constant velocity + Gaussian noise ---

def constant_velocity(history: np.ndarray, t_pred: int = 12) -> np.ndarray:
    """Extrapolates every pedestrian at its last observed velocity."""
    history = np.asarray(history, dtype=np.float64)
    if history.ndim != 3 or history.shape[1] < 2:
        raise ContractError(f"constant-velocity extrapolation needs N x t_obs x 2 with t_obs >= 2, got {history.shape}")
    velocity = history[:, -1] - history[:, -2]
    steps = np.arange(1, t_pred + 1)[None, :, None]
    return history[:, -1:, :] + steps * velocity[:, None, :]


def cv_gaussian_sample(
    history: np.ndarray,
    config: SamplerConfig,
    t_pred: int = 12,
    rng: Optional[np.random.Generator] = None,
) -> SampleSet:
    """Sample 0 is the noise-free extrapolation; the others add i.i.d. N(0, σ²) per coordinate."""
    base = constant_velocity(history, t_pred)
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    noise = rng.normal(0.0, config.sigma, size=(config.num_samples,) + base.shape)
    noise[0] = 0.0
    return SampleSet(base[None] + noise, source=SamplerKind.CV_GAUSSIAN.value)


# --- 2. Recurrent encoder-decoder with latent noise ---

class RecurrentSampler(nn.Module):
    """LSTM encoder over observed displacements; noise joins the hidden state before decoding."""

    def __init__(self, hidden_dim: int = 32, noise_dim: int = 8, t_pred: int = 12):
        super().__init__()
        self.noise_dim, self.t_pred = noise_dim, t_pred
        self.embed = nn.Linear(2, hidden_dim)
        self.encoder = nn.LSTM(hidden_dim, hidden_dim, batch_first=True)
        self.mix = nn.Linear(hidden_dim + noise_dim, hidden_dim)
        self.decoder = nn.LSTMCell(hidden_dim, hidden_dim)
        self.readout = nn.Linear(hidden_dim, 2)
        self.trained = False

    def forward(self, history: torch.Tensor, noise: torch.Tensor) -> torch.Tensor:
        displacement = history[:, 1:] - history[:, :-1]
        _, (h_n, c_n) = self.encoder(F.relu(self.embed(displacement)))
        h = torch.tanh(self.mix(torch.cat([h_n[-1], noise], dim=1)))
        c = c_n[-1]
        position, step = history[:, -1], displacement[:, -1]
        outputs = []
        for _ in range(self.t_pred):
            h, c = self.decoder(F.relu(self.embed(step)), (h, c))
            step = self.readout(h)
            position = position + step
            outputs.append(position)
        return torch.stack(outputs, dim=1)


def train_recurrent_sampler(
    windows: Sequence[TrajectoryWindow],
    epochs: int = 20,
    seed: int = 0,
    lr: float = 1e-3,
    hidden_dim: int = 32,
    noise_dim: int = 8,
    progress: bool = False,
) -> RecurrentSampler:
    """Fits the sampler to the training windows with an L2 loss on future positions."""
    if not windows:
        raise ContractError("sampler training needs at least one window")
    t_pred = windows[0].future.shape[1]
    generator = torch.Generator().manual_seed(seed)
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        sampler = RecurrentSampler(hidden_dim, noise_dim, t_pred)
    optimizer = torch.optim.Adam(sampler.parameters(), lr=lr)
    rng = np.random.default_rng(seed)
    tensors = [
        (torch.as_tensor(w.history, dtype=torch.float32), torch.as_tensor(w.future, dtype=torch.float32))
        for w in windows
    ]
    epoch_iter = tqdm(range(epochs), desc="sampler", leave=False) if progress else range(epochs)
    for epoch in epoch_iter:
        losses = []
        for index in rng.permutation(len(tensors)):
            history, future = tensors[index]
            noise = torch.randn(history.shape[0], noise_dim, generator=generator)
            loss = F.mse_loss(sampler(history, noise), future)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            losses.append(loss.item())
        logger.debug(f"sampler epoch {epoch + 1}: mse {np.mean(losses):.5f}")
    sampler.trained = True
    return sampler


def recurrent_gaussian_sample(
    history: np.ndarray,
    config: SamplerConfig,
    sampler: Optional[RecurrentSampler],
    generator: Optional[torch.Generator] = None,
) -> SampleSet:
    if sampler is None or not sampler.trained:
        raise ContractError("the recurrent sampler must be trained before sampling")
    generator = generator if generator is not None else torch.Generator().manual_seed(config.seed)
    history_t = torch.as_tensor(np.asarray(history), dtype=torch.float32)
    n = history_t.shape[0]
    noise = torch.randn(config.num_samples, n, sampler.noise_dim, generator=generator)
    with torch.no_grad():
        samples = torch.stack([sampler(history_t, z) for z in noise])
    return SampleSet(samples.numpy().astype(np.float64), source=SamplerKind.RECURRENT_GAUSSIAN.value)


def generate_samples(
    history: np.ndarray,
    config: SamplerConfig,
    t_pred: int = 12,
    sampler: Optional[RecurrentSampler] = None,
    seed: Optional[int] = None,
) -> SampleSet:
    """Dispatch on `config.kind`; `seed` (e.g. derived from a window index) overrides `config.seed`."""
    seed = config.seed if seed is None else seed
    if config.kind == SamplerKind.CV_GAUSSIAN:
        return cv_gaussian_sample(history, config, t_pred, np.random.default_rng(seed))
    return recurrent_gaussian_sample(history, config, sampler, torch.Generator().manual_seed(seed))


# --- 3. Sample files: one JSON header line, then a float64 little-endian payload ---

def save_samples(sample_set: SampleSet, path: Path) -> Path:
    psi, n, t_pred, coords = sample_set.samples.shape
    header = {
        "num_samples": psi,
        "num_pedestrians": n,
        "t_pred": t_pred,
        "coords": coords,
        "format_version": SAMPLE_FORMAT_VERSION,
        "source": sample_set.source,
    }
    payload = np.ascontiguousarray(sample_set.samples, dtype="<f8").tobytes()
    return write_bytes_atomic(path, json.dumps(header, sort_keys=True).encode("utf-8") + b"\n" + payload)


def load_samples(path: Path) -> SampleSet:
    path = Path(path)
    if not path.exists():
        raise DataError(f"sample file {path} not found")
    raw = path.read_bytes()
    newline = raw.find(b"\n")
    try:
        header = json.loads(raw[:newline].decode("utf-8")) if newline >= 0 else None
        shape = (header["num_samples"], header["num_pedestrians"], header["t_pred"], header["coords"])
    except (ValueError, KeyError, TypeError):
        raise FormatError(f"sample file {path} has no valid header line")
    if header.get("format_version") != SAMPLE_FORMAT_VERSION:
        raise FormatError(f"sample file {path} has format version {header.get('format_version')}")
    payload = raw[newline + 1:]
    expected = int(np.prod(shape)) * 8
    if len(payload) != expected:
        raise FormatError(f"sample file {path} holds {len(payload)} payload bytes, header {shape} needs {expected}")
    samples = np.frombuffer(payload, dtype="<f8").reshape(shape).astype(np.float64)
    return SampleSet(samples, source=header.get("source", "external"))
