"""Architecture blocks of the trajectory AD search space.

Every block maps a scene of N pedestrians to N rows of output and treats pedestrians
symmetrically, so permuting the input rows permutes the output rows.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from src.errors import ContractError
from src.schemas.pydantic_schemas import BlockConfig

logger = logging.getLogger(__name__)


# --- 1. Input processing (IPM) ---

def ipm_channels(variant: int) -> int:
    return 4 if variant == 3 else 2


def ipm_apply(variant: int, future: torch.Tensor, last_observed: Optional[torch.Tensor] = None) -> torch.Tensor:
    """1: positions, 2: displacements (first one from the last observed position), 3: both."""
    if variant == 1:
        return future
    if variant not in (2, 3):
        raise ContractError(f"IPM variant {variant} outside 1..3")
    if last_observed is None:
        raise ContractError(f"IPM variant {variant} needs the last observed position")
    previous = torch.cat([last_observed.unsqueeze(1), future[:, :-1]], dim=1)
    displacement = future - previous
    if variant == 2:
        return displacement
    return torch.cat([future, displacement], dim=-1)


# --- 2. Feature extraction (FExM) ---

class FeatureExtractor(nn.Module):
    """Base for FExM blocks: (N, t_pred, C) -> (N, t_pred, H) or (N, H)."""

    keeps_time = True

    def forward(self, processed: torch.Tensor) -> torch.Tensor:
        if processed.shape[0] == 0:
            raise ContractError("feature extraction needs at least one pedestrian")
        return self.extract(processed)

    def extract(self, processed: torch.Tensor) -> torch.Tensor:
        raise NotImplementedError


class SparseGraphConv(FeatureExtractor):
    """Graph convolution over a learned, sparsified pedestrian adjacency, per frame."""

    def __init__(self, in_channels: int, hidden_dim: int):
        super().__init__()
        self.embed = nn.Linear(in_channels, hidden_dim)
        self.query = nn.Linear(hidden_dim, hidden_dim, bias=False)
        self.key = nn.Linear(hidden_dim, hidden_dim, bias=False)
        self.conv1 = nn.Linear(hidden_dim, hidden_dim)
        self.conv2 = nn.Linear(hidden_dim, hidden_dim)
        self.scale = math.sqrt(hidden_dim)

    def adjacency(self, embedded: torch.Tensor) -> torch.Tensor:
        scores = self.query(embedded) @ self.key(embedded).transpose(1, 2) / self.scale
        # negative affinities are pruned to exact zeros
        adj = torch.relu(torch.tanh(scores))
        eye = torch.eye(adj.shape[-1], dtype=adj.dtype, device=adj.device)
        adj = adj * (1.0 - eye) + eye
        return adj / adj.sum(dim=-1, keepdim=True)

    def extract(self, processed):
        embedded = torch.relu(self.embed(processed)).transpose(0, 1)  # T x N x H
        adj = self.adjacency(embedded)
        hidden = torch.relu(self.conv1(adj @ embedded))
        return self.conv2(adj @ hidden).transpose(0, 1)


class TrajectoryMLP(FeatureExtractor):
    """Per-pedestrian perceptron over the flattened trajectory."""

    keeps_time = False

    def __init__(self, in_channels: int, hidden_dim: int, t_pred: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(in_channels * t_pred, hidden_dim),
            nn.ReLU(),
            nn.Linear(hidden_dim, hidden_dim),
        )

    def extract(self, processed):
        return self.net(processed.reshape(processed.shape[0], -1))


class SpatioTemporalGCN(FeatureExtractor):
    """Distance-kernel graph convolution per frame followed by a temporal convolution."""

    def __init__(self, in_channels: int, hidden_dim: int, kernel_size: int = 3):
        super().__init__()
        self.spatial = nn.Linear(in_channels, hidden_dim)
        self.spatial_act = nn.PReLU()
        self.temporal = nn.Conv1d(hidden_dim, hidden_dim, kernel_size, padding=kernel_size // 2)
        self.temporal_act = nn.PReLU()

    @staticmethod
    def distance_kernel(positions: torch.Tensor) -> torch.Tensor:
        """Symmetric-normalised 1 / (1 + distance) adjacency, self-loops included."""
        diff = positions.unsqueeze(2) - positions.unsqueeze(1)
        adj = 1.0 / (1.0 + diff.norm(dim=-1))
        inv_sqrt_deg = adj.sum(dim=-1).rsqrt()
        return inv_sqrt_deg.unsqueeze(-1) * adj * inv_sqrt_deg.unsqueeze(-2)

    def extract(self, processed):
        adj = self.distance_kernel(processed[..., :2].detach().transpose(0, 1))
        hidden = self.spatial_act(adj @ self.spatial(processed.transpose(0, 1)))  # T x N x H
        hidden = self.temporal(hidden.permute(1, 2, 0))  # N x H x T
        return self.temporal_act(hidden).transpose(1, 2)


class MotionLSTM(FeatureExtractor):
    """LSTM motion encoder; the final hidden state is the feature."""

    keeps_time = False

    def __init__(self, in_channels: int, hidden_dim: int):
        super().__init__()
        self.embed = nn.Linear(in_channels, hidden_dim)
        self.lstm = nn.LSTM(hidden_dim, hidden_dim, batch_first=True)

    def extract(self, processed):
        _, (h_n, _) = self.lstm(torch.relu(self.embed(processed)))
        return h_n[-1]


class CrowdGAT(FeatureExtractor):
    """Single-head graph attention across pedestrians, per frame."""

    def __init__(self, in_channels: int, hidden_dim: int):
        super().__init__()
        self.embed = nn.Linear(in_channels, hidden_dim)
        self.proj = nn.Linear(hidden_dim, hidden_dim, bias=False)
        self.attn_src = nn.Linear(hidden_dim, 1, bias=False)
        self.attn_dst = nn.Linear(hidden_dim, 1, bias=False)
        self.out = nn.Linear(hidden_dim, hidden_dim)

    def extract(self, processed):
        wh = self.proj(torch.relu(self.embed(processed))).transpose(0, 1)  # T x N x H
        scores = F.leaky_relu(self.attn_src(wh) + self.attn_dst(wh).transpose(1, 2), 0.2)
        alpha = torch.softmax(scores, dim=-1)
        return self.out(F.elu(alpha @ wh)).transpose(0, 1)


def build_fexm(config: BlockConfig, in_channels: int, t_pred: int) -> FeatureExtractor:
    variant, hidden = config.variant_id, config.hidden_dim
    if variant == 1:
        return SparseGraphConv(in_channels, hidden)
    if variant == 2:
        return TrajectoryMLP(in_channels, hidden, t_pred)
    if variant == 3:
        return SpatioTemporalGCN(in_channels, hidden)
    if variant == 4:
        return MotionLSTM(in_channels, hidden)
    return CrowdGAT(in_channels, hidden)


# --- 3. Feature enhancement (FEnM) ---

class IdentityEnhancer(nn.Module):
    def forward(self, processed, features):
        return features


class EnergyGate(nn.Module):
    """A learned scalar energy gates a residual correction of the features."""

    def __init__(self, hidden_dim: int):
        super().__init__()
        self.energy = nn.Sequential(nn.Linear(hidden_dim, hidden_dim), nn.Tanh(), nn.Linear(hidden_dim, 1))
        self.correction = nn.Linear(hidden_dim, hidden_dim)

    def forward(self, processed, features):
        gate = torch.sigmoid(-self.energy(features))
        return features + gate * self.correction(features)


class AttentionPooling(nn.Module):
    """Adds a social context vector pooled by attention over all pedestrians."""

    def __init__(self, hidden_dim: int):
        super().__init__()
        self.query = nn.Linear(hidden_dim, hidden_dim)
        self.key = nn.Linear(hidden_dim, hidden_dim)
        self.value = nn.Linear(hidden_dim, hidden_dim)
        self.scale = math.sqrt(hidden_dim)

    def context(self, features: torch.Tensor) -> torch.Tensor:
        per_frame = features.dim() == 3
        f = features.transpose(0, 1) if per_frame else features
        scores = self.query(f) @ self.key(f).transpose(-1, -2) / self.scale
        ctx = torch.softmax(scores, dim=-1) @ self.value(f)
        return ctx.transpose(0, 1) if per_frame else ctx

    def forward(self, processed, features):
        return features + self.context(features)


class TemporalLSTM(nn.Module):
    """LSTM along the time axis; pooled features pass through unchanged.

    `keeps_time=False` declares a pooled feeder up front: no LSTM is built.
    """

    def __init__(self, hidden_dim: int, keeps_time: Optional[bool] = None):
        super().__init__()
        self.degraded = keeps_time is False
        self.lstm = None if self.degraded else nn.LSTM(hidden_dim, hidden_dim, batch_first=True)
        if self.degraded:
            logger.info("FEnM_4 fed by pooled features; acting as identity")

    def forward(self, processed, features):
        if features.dim() == 2 or self.lstm is None:
            if not self.degraded:
                logger.warning("FEnM_4 received pooled features; acting as identity")
                self.degraded = True
            return features
        out, _ = self.lstm(features)
        return out


def build_fenm(config: BlockConfig) -> nn.Module:
    variant, hidden = config.variant_id, config.hidden_dim
    if variant == 1:
        return IdentityEnhancer()
    if variant == 2:
        return EnergyGate(hidden)
    if variant == 3:
        return AttentionPooling(hidden)
    return TemporalLSTM(hidden, keeps_time=config.keeps_time)


# --- 4. Feature fusion (FFM) ---

@dataclass
class FeatureBundle:
    first: torch.Tensor
    second: torch.Tensor
    first_enhanced: torch.Tensor
    second_enhanced: torch.Tensor

    def is_finite(self) -> bool:
        return all(torch.isfinite(t).all().item() for t in (self.first, self.second, self.first_enhanced, self.second_enhanced))


def pool_time(features: torch.Tensor) -> torch.Tensor:
    return features.mean(dim=1) if features.dim() == 3 else features


def ffm_width(variant: int, hidden_dim: int) -> int:
    return 4 * hidden_dim if variant == 1 else 2 * hidden_dim


def ffm_apply(variant: int, bundle: FeatureBundle) -> torch.Tensor:
    """1: concatenate raw and enhanced features of both branches, 2: enhanced only."""
    if variant == 1:
        parts = (bundle.first, bundle.second, bundle.first_enhanced, bundle.second_enhanced)
    else:
        parts = (bundle.first_enhanced, bundle.second_enhanced)
    return torch.cat([pool_time(p) for p in parts], dim=-1)


# --- 5. Output (OM): H_all -> predicted history N x t_obs x 2 ---

class TemporalConvDecoder(nn.Module):
    def __init__(self, fused_dim: int, hidden_dim: int, t_obs: int):
        super().__init__()
        self.hidden_dim, self.t_obs = hidden_dim, t_obs
        self.expand = nn.Linear(fused_dim, hidden_dim * t_obs)
        self.conv1 = nn.Conv1d(hidden_dim, hidden_dim, 3, padding=1)
        self.conv2 = nn.Conv1d(hidden_dim, 2, 3, padding=1)

    def forward(self, fused):
        x = self.expand(fused).reshape(fused.shape[0], self.hidden_dim, self.t_obs)
        return self.conv2(torch.relu(self.conv1(x))).transpose(1, 2)


class TimeExtrapolator(nn.Module):
    """Channel-wise convolution turning one feature channel into t_obs time channels."""

    def __init__(self, fused_dim: int, t_obs: int):
        super().__init__()
        self.txp = nn.Conv1d(1, t_obs, 3, padding=1)
        self.act = nn.PReLU()
        self.readout = nn.Linear(fused_dim, 2)

    def forward(self, fused):
        return self.readout(self.act(self.txp(fused.unsqueeze(1))))


class FullyConnectedDecoder(nn.Module):
    def __init__(self, fused_dim: int, hidden_dim: int, t_obs: int):
        super().__init__()
        self.t_obs = t_obs
        self.net = nn.Sequential(nn.Linear(fused_dim, hidden_dim), nn.ReLU(), nn.Linear(hidden_dim, t_obs * 2))

    def forward(self, fused):
        return self.net(fused).reshape(fused.shape[0], self.t_obs, 2)


class RecurrentDecoder(nn.Module):
    """LSTM cell unrolled t_obs steps, feeding back its own readout."""

    def __init__(self, fused_dim: int, hidden_dim: int, t_obs: int):
        super().__init__()
        self.t_obs = t_obs
        self.init_hidden = nn.Linear(fused_dim, hidden_dim)
        self.cell = nn.LSTMCell(2, hidden_dim)
        self.readout = nn.Linear(hidden_dim, 2)

    def forward(self, fused):
        hx = torch.tanh(self.init_hidden(fused))
        cx = torch.zeros_like(hx)
        step = fused.new_zeros(fused.shape[0], 2)
        outputs = []
        for _ in range(self.t_obs):
            hx, cx = self.cell(step, (hx, cx))
            step = self.readout(hx)
            outputs.append(step)
        return torch.stack(outputs, dim=1)


def build_om(config: BlockConfig, fused_dim: int, t_obs: int) -> nn.Module:
    variant, hidden = config.variant_id, config.hidden_dim
    if variant == 1:
        return TemporalConvDecoder(fused_dim, hidden, t_obs)
    if variant == 2:
        return TimeExtrapolator(fused_dim, t_obs)
    if variant == 3:
        return FullyConnectedDecoder(fused_dim, hidden, t_obs)
    return RecurrentDecoder(fused_dim, hidden, t_obs)
