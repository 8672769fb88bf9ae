"""Trainable trajectory AD model: maps a (candidate) future back to the observed history."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from tqdm import tqdm

from src.blocks import (
    ClusterHead,
    FeatureBundle,
    MemoryBank,
    MemoryRead,
    RSRProjection,
    TrajectoryDiscriminator,
    build_fenm,
    build_fexm,
    build_om,
    ffm_apply,
    ffm_width,
    ipm_apply,
    ipm_channels,
)
from src.data.trajectories import NegativeWindow, TrajectoryWindow
from src.errors import ContractError, DataError, FormatError, NumericError
from src.losses import (
    LossVector,
    anomaly_score,
    loss_adv,
    loss_cluster,
    loss_fea,
    loss_memory,
    loss_out,
    loss_rsr,
    training_loss,
)
from src.model.space import ARCHITECTURE_SLOTS, TADSpec, decode, describe_spec, encode
from src.schemas.pydantic_schemas import COMPONENT_NAMES, BlockConfig, RunConfig

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
ArrayLike = Union[np.ndarray, torch.Tensor]
Window = Union[TrajectoryWindow, NegativeWindow]


@dataclass
class ForwardOutput:
    """Everything the loss components need from one forward pass (centred coordinates)."""
    predicted: torch.Tensor  # O', N x t_obs x 2
    history: torch.Tensor  # O, N x t_obs x 2
    future: torch.Tensor  # N x t_pred x 2
    bundle: FeatureBundle
    fused: torch.Tensor  # H_all
    memory: Optional[MemoryRead] = None
    assignments: Optional[torch.Tensor] = None


def _as_tensor(values: ArrayLike) -> torch.Tensor:
    return torch.as_tensor(values, dtype=torch.float32)


class TADModel(nn.Module):
    """IPM -> two (FExM, FEnM) branches -> FFM -> OM, plus the auxiliaries Λ asks for."""

    def __init__(
        self,
        spec: TADSpec,
        hidden_dim: int = 64,
        t_obs: int = 8,
        t_pred: int = 12,
        memory_size: int = 10,
        n_clusters: int = 8,
        sep_margin: float = 1.0,
        hinged_separateness: bool = True,
    ):
        super().__init__()
        self.spec = spec
        self.hidden_dim, self.t_obs, self.t_pred = hidden_dim, t_obs, t_pred
        self.memory_size, self.n_clusters = memory_size, n_clusters
        self.sep_margin, self.hinged_separateness = sep_margin, hinged_separateness
        self.epochs_trained = 0
        self.loss_history: List[float] = []

        configs = {
            slot: BlockConfig(slot=slot, variant_id=variant, hidden_dim=hidden_dim)
            for slot, variant in zip(ARCHITECTURE_SLOTS, spec.architecture)
        }
        in_channels = ipm_channels(configs["ipm"].variant_id)
        self.fexm_1st = build_fexm(configs["fexm_1st"], in_channels, t_pred)
        self.fexm_2nd = build_fexm(configs["fexm_2nd"], in_channels, t_pred)
        # each enhancer sees the output layout of the extractor feeding it
        for branch, extractor in (("1st", self.fexm_1st), ("2nd", self.fexm_2nd)):
            for slot in (f"fexm_{branch}", f"fenm_{branch}"):
                configs[slot] = configs[slot].model_copy(update={"keeps_time": extractor.keeps_time})
        self.fenm_1st = build_fenm(configs["fenm_1st"])
        self.fenm_2nd = build_fenm(configs["fenm_2nd"])
        fused_dim = ffm_width(configs["ffm"].variant_id, hidden_dim)
        self.om = build_om(configs["om"], fused_dim, t_obs)
        self.block_configs = configs

        flags = spec.auxiliaries
        self.memory = MemoryBank(memory_size, hidden_dim) if flags.memory else None
        self.cluster_head = ClusterHead(n_clusters, fused_dim) if flags.clustering else None
        self.rsr = RSRProjection(fused_dim) if flags.rsr else None
        self.discriminator = TrajectoryDiscriminator(t_pred, t_obs, hidden_dim) if flags.discriminator else None

    # --- 1. Forward pass ---

    def forward(self, future: torch.Tensor, history: torch.Tensor) -> ForwardOutput:
        n = future.shape[0]
        if future.shape != (n, self.t_pred, 2) or history.shape != (n, self.t_obs, 2):
            raise ContractError(
                f"expected {n}x{self.t_pred}x2 future and {n}x{self.t_obs}x2 history, "
                f"got {tuple(future.shape)} and {tuple(history.shape)}"
            )
        # each pedestrian in its own frame: origin at its first future position
        origin = future[:, :1]
        future, history = future - origin, history - origin

        ipm, _, _, _, _, ffm, _ = self.spec.architecture
        processed = ipm_apply(ipm, future, history[:, -1])
        first = self.fexm_1st(processed)
        second = self.fexm_2nd(processed)
        first_enhanced = self.fenm_1st(processed, first)
        second_enhanced = self.fenm_2nd(processed, second)

        read = None
        if self.memory is not None:
            read = self.memory(first_enhanced)
            first_enhanced = read.retrieved

        bundle = FeatureBundle(first, second, first_enhanced, second_enhanced)
        fused = ffm_apply(ffm, bundle)
        predicted = self.om(fused)
        assignments = self.cluster_head(fused) if self.cluster_head is not None else None
        return ForwardOutput(predicted, history, future, bundle, fused, read, assignments)

    def compute_loss_vector(self, out: ForwardOutput) -> LossVector:
        """8 x N components; rows with a zero λ are left as exact zeros."""
        weight = dict(zip(COMPONENT_NAMES, self.spec.lambdas))
        zeros = out.predicted.new_zeros(out.predicted.shape[0])
        rows = [loss_out(out.history, out.predicted)] + [zeros] * 7

        if self.discriminator is not None:
            prob_fake, feature_fake = self.discriminator(out.future, out.predicted)
            if weight["adv"]:
                rows[1] = loss_adv(prob_fake)
            if weight["fea"]:
                _, feature_real = self.discriminator(out.future, out.history)
                rows[2] = loss_fea(feature_real, feature_fake)
        if out.memory is not None:
            compactness, separateness = loss_memory(
                out.memory.queries, out.memory.nearest, out.memory.second_nearest,
                margin=self.sep_margin, hinged=self.hinged_separateness,
            )
            if weight["com"]:
                rows[3] = compactness
            if weight["sep"]:
                rows[4] = separateness
        if out.assignments is not None:
            rows[5] = loss_cluster(out.assignments, detach_target=True)
        if self.rsr is not None:
            residual, structure = loss_rsr(out.fused, self.rsr.matrix)
            if weight["rsr1"]:
                rows[6] = residual
            if weight["rsr2"]:
                rows[7] = structure
        return LossVector(torch.stack(rows))

    # --- 2. Training ---

    def _discriminator_step(self, optimizer: torch.optim.Optimizer, out: ForwardOutput):
        optimizer.zero_grad()
        prob_real, _ = self.discriminator(out.future, out.history)
        prob_fake, _ = self.discriminator(out.future, out.predicted.detach())
        loss = (
            F.binary_cross_entropy(prob_real.clamp(1e-6, 1 - 1e-6), torch.ones_like(prob_real))
            + F.binary_cross_entropy(prob_fake.clamp(1e-6, 1 - 1e-6), torch.zeros_like(prob_fake))
        )
        loss.backward()
        optimizer.step()

    def fit(
        self,
        windows: Sequence[TrajectoryWindow],
        epochs: int,
        lr: float = 1e-3,
        seed: int = 0,
        progress: bool = False,
    ) -> List[float]:
        """Adam, one window per step, reshuffled every epoch. Returns per-epoch mean loss."""
        if not windows:
            raise ContractError("training needs at least one window")
        rng = np.random.default_rng(seed)
        tensors = [(_as_tensor(w.future), _as_tensor(w.history)) for w in windows]
        main_params = [p for name, p in self.named_parameters() if not name.startswith("discriminator.")]
        optimizer = torch.optim.Adam(main_params, lr=lr)
        disc_optimizer = (
            torch.optim.Adam(self.discriminator.parameters(), lr=lr) if self.discriminator is not None else None
        )

        history = []
        self.train()
        epoch_iter = tqdm(range(epochs), desc="train", leave=False) if progress else range(epochs)
        for epoch in epoch_iter:
            losses = []
            for index in rng.permutation(len(tensors)):
                out = self(*tensors[index])
                loss_vector = self.compute_loss_vector(out)
                loss = training_loss(loss_vector, self.spec.lambdas)
                if not torch.isfinite(loss):
                    component = loss_vector.first_non_finite() or "out"
                    raise NumericError(
                        f"non-finite training loss at epoch {epoch + 1}; first offending component: L_{component}"
                    )
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                # strict 1:1 alternation with the model step
                if disc_optimizer is not None:
                    self._discriminator_step(disc_optimizer, out)
                losses.append(loss.item())

            mean_loss = float(np.mean(losses))
            history.append(mean_loss)
            self.loss_history.append(mean_loss)
            self.epochs_trained += 1
            logger.debug(f"epoch {self.epochs_trained}: mean loss {mean_loss:.5f}")
        return history

    # --- 3. Scoring ---

    def score(self, future: ArrayLike, history: ArrayLike) -> np.ndarray:
        """Per-pedestrian anomaly score under Γ; parameters are not touched."""
        was_training = self.training
        self.eval()
        with torch.no_grad():
            out = self(_as_tensor(future), _as_tensor(history))
            scores = anomaly_score(self.compute_loss_vector(out), self.spec.gammas)
        self.train(was_training)
        return scores.numpy().astype(np.float64)

    def score_window(self, window: Window) -> np.ndarray:
        return self.score(window.future, window.history)


def build(spec: TADSpec, hidden_dim: int = 64, seed: int = 0, **kwargs) -> TADModel:
    """Instantiate `spec` with parameters drawn from `seed`."""
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        return TADModel(spec, hidden_dim=hidden_dim, **kwargs)


# --- 4. Checkpoints ---

def save_checkpoint(model: TADModel, path: Path) -> Path:
    """Writes `path` plus a `.txt` sidecar with the readable spec."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "sequence": encode(model.spec),
        "hyper": {
            "hidden_dim": model.hidden_dim,
            "t_obs": model.t_obs,
            "t_pred": model.t_pred,
            "memory_size": model.memory_size,
            "n_clusters": model.n_clusters,
            "sep_margin": model.sep_margin,
            "hinged_separateness": model.hinged_separateness,
        },
        "state_dict": model.state_dict(),
        "loss_history": list(model.loss_history),
        "epochs_trained": model.epochs_trained,
    }
    tmp = path.with_name(path.name + ".tmp")
    torch.save(payload, tmp)
    tmp.replace(path)
    path.with_suffix(".txt").write_text(describe_spec(model.spec), encoding="utf-8")
    logger.info(f"Saved checkpoint {path}")
    return path


def load_checkpoint(path: Path) -> TADModel:
    path = Path(path)
    if not path.exists():
        raise DataError(f"checkpoint {path} not found")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as e:
        raise FormatError(f"checkpoint {path} is unreadable: {e}")
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise FormatError(f"checkpoint {path} has format version {payload.get('format_version')}")
    model = TADModel(decode(payload["sequence"]), **payload["hyper"])
    model.load_state_dict(payload["state_dict"])
    model.loss_history = list(payload["loss_history"])
    model.epochs_trained = int(payload["epochs_trained"])
    return model


def build_from_config(spec: TADSpec, config: RunConfig) -> TADModel:
    """`build` with every model hyperparameter taken from a run configuration."""
    return build(
        spec,
        hidden_dim=config.hidden_dim,
        seed=config.seed,
        t_obs=config.t_obs,
        t_pred=config.t_pred,
        memory_size=config.memory_size,
        n_clusters=config.n_clusters,
        sep_margin=config.sep_margin,
        hinged_separateness=config.hinged_separateness,
    )
