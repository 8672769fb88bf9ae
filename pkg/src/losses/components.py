"""The eight per-pedestrian loss components and their Λ / Γ combinations."""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import torch

from src.errors import ConfigurationError, ContractError
from src.schemas.pydantic_schemas import COMPONENT_NAMES

PROB_EPS = 1e-6


def _same_shape(a: torch.Tensor, b: torch.Tensor, what: str):
    if a.shape != b.shape:
        raise ContractError(f"{what}: shapes {tuple(a.shape)} and {tuple(b.shape)} differ")


# --- 1. Output error ---

def loss_out(history: torch.Tensor, predicted: torch.Tensor) -> torch.Tensor:
    """Euclidean norm of each pedestrian's flattened history residual."""
    _same_shape(history, predicted, "loss_out")
    return (history - predicted).reshape(history.shape[0], -1).norm(dim=1)


# --- 2. Discriminator terms ---

def loss_adv(prob_fake: torch.Tensor) -> torch.Tensor:
    """Non-saturating generator loss, -log D(I, O')."""
    return -torch.log(prob_fake.clamp(PROB_EPS, 1.0 - PROB_EPS))


def loss_fea(feature_real: torch.Tensor, feature_fake: torch.Tensor) -> torch.Tensor:
    _same_shape(feature_real, feature_fake, "loss_fea")
    return (feature_real - feature_fake).norm(dim=-1)


# --- 3. Memory compactness / separateness ---

def loss_memory(
    queries: torch.Tensor,
    nearest: torch.Tensor,
    second_nearest: Optional[torch.Tensor],
    margin: float = 1.0,
    hinged: bool = True,
) -> Tuple[torch.Tensor, torch.Tensor]:
    """Queries are N x K x H; both results are summed over each pedestrian's K queries.

    With `hinged=False` the separateness term is the bare distance difference, unbounded below.
    """
    if second_nearest is None:
        raise ContractError("separateness needs a second nearest item (memory size >= 2)")
    compactness = ((queries - nearest) ** 2).sum(dim=-1).sum(dim=1)
    gap = (queries - nearest).norm(dim=-1) - (queries - second_nearest).norm(dim=-1)
    if hinged:
        separateness = torch.clamp(gap + margin, min=0.0).sum(dim=1)
    else:
        separateness = gap.sum(dim=1)
    return compactness, separateness


# --- 4. Clustering ---

def cluster_target(assignments: torch.Tensor) -> torch.Tensor:
    """Sharpened target d_ic proportional to b_ic^2 / sum_i b_ic, rows renormalised."""
    weight = assignments ** 2 / assignments.sum(dim=0, keepdim=True)
    return weight / weight.sum(dim=1, keepdim=True)


def loss_cluster(assignments: torch.Tensor, detach_target: bool = False) -> torch.Tensor:
    """sum_c b_c log(b_c / d_c) per row, with 0 log 0 = 0."""
    target = cluster_target(assignments)
    if detach_target:
        target = target.detach()
    return (torch.xlogy(assignments, assignments) - torch.xlogy(assignments, target)).sum(dim=1)


# --- 5. Robust subspace recovery ---

def loss_rsr(fused: torch.Tensor, matrix: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
    """Per-row squared reconstruction residual, and ||A A^T - I||_F^2 repeated per row."""
    if matrix.dim() != 2 or matrix.shape[1] != fused.shape[-1]:
        raise ContractError(f"RSR matrix {tuple(matrix.shape)} does not match width {fused.shape[-1]}")
    reconstructed = (fused @ matrix.T) @ matrix
    residual = ((fused - reconstructed) ** 2).sum(dim=-1)
    eye = torch.eye(matrix.shape[0], dtype=matrix.dtype, device=matrix.device)
    structure = ((matrix @ matrix.T - eye) ** 2).sum()
    return residual, structure.expand(fused.shape[0])


# --- 6. Combination ---

@dataclass
class LossVector:
    """8 x N components, rows ordered like COMPONENT_NAMES. Inactive rows are exact zeros."""
    components: torch.Tensor

    @property
    def num_pedestrians(self) -> int:
        return self.components.shape[1]

    def row(self, name: str) -> torch.Tensor:
        return self.components[COMPONENT_NAMES.index(name)]

    def first_non_finite(self) -> Optional[str]:
        for name, row in zip(COMPONENT_NAMES, self.components):
            if not torch.isfinite(row).all():
                return name
        return None


def _weighted_sum(components: torch.Tensor, weights: Sequence[float]) -> Optional[torch.Tensor]:
    # zero-weight rows never enter the sum
    total = None
    for row, weight in zip(components, weights):
        if weight == 0:
            continue
        term = weight * row
        total = term if total is None else total + term
    return total


def training_loss(loss_vector: LossVector, lambdas: Sequence[float]) -> torch.Tensor:
    """Mean over pedestrians of the Λ-weighted component sum."""
    total = _weighted_sum(loss_vector.components, lambdas)
    if total is None:
        raise ConfigurationError("all loss weights are zero")
    return total.mean()


def anomaly_score(loss_vector: LossVector, gammas: Sequence[float]) -> torch.Tensor:
    """Per-pedestrian Γ-weighted component sum; higher means more anomalous."""
    total = _weighted_sum(loss_vector.components, gammas)
    if total is None:
        raise ConfigurationError("all scoring weights are zero; the anomaly score would be constant")
    return total
