"""Auxiliary structures attached to a model when their loss weights are nonzero."""

from dataclasses import dataclass
from typing import Optional, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from src.errors import ContractError


# --- Memory bank ---

@dataclass
class MemoryRead:
    """Result of reading the memory with one query per pedestrian (or pedestrian-frame)."""
    retrieved: torch.Tensor  # same shape as the features
    read: torch.Tensor  # N x K x H, similarity-weighted sum of items
    queries: torch.Tensor  # N x K x H
    nearest: torch.Tensor  # N x K x H
    second_nearest: Optional[torch.Tensor]  # N x K x H
    nearest_index: torch.Tensor  # N x K
    second_index: torch.Tensor  # N x K


def memory_query(features: torch.Tensor, items: torch.Tensor) -> MemoryRead:
    if items.shape[0] < 2:
        raise ContractError(f"memory needs at least 2 items, got {items.shape[0]}")
    n, h = features.shape[0], features.shape[-1]
    queries = features.reshape(n, -1, h)
    similarity = F.cosine_similarity(queries.unsqueeze(2), items[None, None], dim=-1)  # N x K x M
    read = torch.softmax(similarity, dim=-1) @ items
    top = similarity.topk(2, dim=-1).indices
    return MemoryRead(
        retrieved=(queries + read).reshape(features.shape),
        read=read,
        queries=queries,
        nearest=items[top[..., 0]],
        second_nearest=items[top[..., 1]],
        nearest_index=top[..., 0],
        second_index=top[..., 1],
    )


class MemoryBank(nn.Module):
    def __init__(self, size: int = 10, dim: int = 64):
        super().__init__()
        if size < 2:
            raise ContractError(f"memory needs at least 2 items, got {size}")
        self.items = nn.Parameter(torch.randn(size, dim))

    def forward(self, features: torch.Tensor) -> MemoryRead:
        return memory_query(features, self.items)


# --- Clustering head ---

def cluster_assign(fused: torch.Tensor, centers: torch.Tensor) -> torch.Tensor:
    """Student-t soft assignment of each row of `fused` to the cluster centres."""
    if centers.shape[0] < 2:
        raise ContractError(f"clustering needs at least 2 centres, got {centers.shape[0]}")
    sq_dist = ((fused.unsqueeze(1) - centers.unsqueeze(0)) ** 2).sum(dim=-1)
    kernel = 1.0 / (1.0 + sq_dist)
    return kernel / kernel.sum(dim=1, keepdim=True)


class ClusterHead(nn.Module):
    def __init__(self, n_clusters: int, dim: int):
        super().__init__()
        if n_clusters < 2:
            raise ContractError(f"clustering needs at least 2 centres, got {n_clusters}")
        self.centers = nn.Parameter(torch.randn(n_clusters, dim))

    def forward(self, fused: torch.Tensor) -> torch.Tensor:
        return cluster_assign(fused, self.centers)


# --- Robust subspace recovery ---

def rsr_project(fused: torch.Tensor, matrix: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
    if matrix.dim() != 2 or matrix.shape[1] != fused.shape[-1]:
        raise ContractError(f"RSR matrix {tuple(matrix.shape)} does not match width {fused.shape[-1]}")
    projected = fused @ matrix.T
    return projected, projected @ matrix


class RSRProjection(nn.Module):
    def __init__(self, dim: int, latent_dim: Optional[int] = None):
        super().__init__()
        latent_dim = latent_dim or max(1, dim // 2)
        if latent_dim > dim:
            raise ContractError(f"RSR latent width {latent_dim} exceeds {dim}")
        self.matrix = nn.Parameter(torch.empty(latent_dim, dim))
        nn.init.orthogonal_(self.matrix)

    def forward(self, fused: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        return rsr_project(fused, self.matrix)


# --- Discriminator ---

class TrajectoryDiscriminator(nn.Module):
    """Judges whether a history fits a future; scores each pedestrian independently."""

    def __init__(self, t_pred: int, t_obs: int, hidden_dim: int = 64):
        super().__init__()
        self.t_pred, self.t_obs = t_pred, t_obs
        self.features = nn.Sequential(
            nn.Linear((t_pred + t_obs) * 2, hidden_dim),
            nn.LeakyReLU(0.2),
            nn.Linear(hidden_dim, hidden_dim),
            nn.LeakyReLU(0.2),
        )
        self.classifier = nn.Linear(hidden_dim, 1)

    def forward(self, future: torch.Tensor, history: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        n = future.shape[0]
        if future.shape != (n, self.t_pred, 2) or history.shape != (n, self.t_obs, 2):
            raise ContractError(
                f"discriminator expects {n}x{self.t_pred}x2 and {n}x{self.t_obs}x2, "
                f"got {tuple(future.shape)} and {tuple(history.shape)}"
            )
        feature = self.features(torch.cat([future.reshape(n, -1), history.reshape(n, -1)], dim=1))
        prob = torch.sigmoid(self.classifier(feature)).squeeze(-1)
        return prob, feature


def discriminator_score(
    discriminator: TrajectoryDiscriminator, future: torch.Tensor, history: torch.Tensor
) -> Tuple[torch.Tensor, torch.Tensor]:
    """Per-pedestrian probability that `history` is real, and the penultimate feature map."""
    return discriminator(future, history)
