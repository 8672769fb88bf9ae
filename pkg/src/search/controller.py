"""Recurrent controller over operator sequences and its REINFORCE update."""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from src.model.space import GAMMA_OFFSET, LAMBDA_OFFSET, SEQUENCE_LENGTH, SLOT_OPTION_COUNTS, USE_LAMBDA
from src.schemas.pydantic_schemas import LAMBDA1_OPTIONS, LAMBDA_OPTIONS

logger = logging.getLogger(__name__)

PAIR_OFFSET = GAMMA_OFFSET - LAMBDA_OFFSET


def zero_lambda_choices(slot: int) -> torch.Tensor:
    """Boolean per option of λ slot `slot`: does it mean weight 0?"""
    options = LAMBDA1_OPTIONS if slot == LAMBDA_OFFSET else LAMBDA_OPTIONS
    return torch.tensor([value == 0 for value in options])


@dataclass
class Rollout:
    choices: torch.Tensor  # B x 23
    log_probs: torch.Tensor  # B x 23
    entropies: torch.Tensor  # B x 23

    def sequences(self) -> List[List[int]]:
        return self.choices.tolist()


class Controller(nn.Module):
    """LSTM cell emitting one categorical choice per slot.

    Slot t conditions on the embedding of slot t-1's choice (a learned start token feeds
    slot 0). Each slot has its own embedding table and output head.
    """

    def __init__(self, embedding_size: int = 100, hidden_size: int = 100):
        super().__init__()
        self.option_counts = SLOT_OPTION_COUNTS
        self.hidden_size = hidden_size
        self.start = nn.Parameter(torch.randn(embedding_size) * 0.1)
        self.cell = nn.LSTMCell(embedding_size, hidden_size)
        self.embeddings = nn.ModuleList(nn.Embedding(c, embedding_size) for c in self.option_counts)
        self.heads = nn.ModuleList(nn.Linear(hidden_size, c) for c in self.option_counts)
        self._zero_lambda = [zero_lambda_choices(LAMBDA_OFFSET + i) for i in range(PAIR_OFFSET)]

    def _masked_logits(self, slot: int, logits: torch.Tensor, choices: List[torch.Tensor]) -> torch.Tensor:
        if slot < GAMMA_OFFSET:
            return logits
        paired = slot - PAIR_OFFSET
        blocked = self._zero_lambda[paired - LAMBDA_OFFSET][choices[paired]]  # B
        option = torch.arange(logits.shape[1]) == USE_LAMBDA
        return logits.masked_fill(blocked.unsqueeze(1) & option.unsqueeze(0), float("-inf"))

    def rollout(
        self,
        batch: int = 1,
        generator: Optional[torch.Generator] = None,
        forced: Optional[torch.Tensor] = None,
        greedy: bool = False,
    ) -> Rollout:
        """Sample `batch` sequences, or replay `forced` ones (B x 23) to get their log-probabilities."""
        if forced is not None:
            forced = torch.as_tensor(forced, dtype=torch.long).reshape(-1, SEQUENCE_LENGTH)
            batch = forced.shape[0]
        h = self.start.new_zeros(batch, self.hidden_size)
        c = self.start.new_zeros(batch, self.hidden_size)
        x = self.start.expand(batch, -1)
        choices, log_probs, entropies = [], [], []
        for slot, (head, embedding) in enumerate(zip(self.heads, self.embeddings)):
            h, c = self.cell(x, (h, c))
            log_p = F.log_softmax(self._masked_logits(slot, head(h), choices), dim=-1)
            p = log_p.exp()
            if forced is not None:
                choice = forced[:, slot]
            elif greedy:
                choice = log_p.argmax(dim=-1)
            else:
                choice = torch.multinomial(p.detach(), 1, generator=generator).squeeze(1)
            choices.append(choice)
            log_probs.append(log_p.gather(1, choice.unsqueeze(1)).squeeze(1))
            # masked options have log_p = -inf and contribute 0
            finite_log_p = torch.where(p > 0, log_p, torch.zeros_like(log_p))
            entropies.append(-(p * finite_log_p).sum(dim=-1))
            x = embedding(choice)
        return Rollout(torch.stack(choices, 1), torch.stack(log_probs, 1), torch.stack(entropies, 1))

    def first_slot_probabilities(self) -> torch.Tensor:
        with torch.no_grad():
            h, _ = self.cell(self.start.unsqueeze(0))
            return F.softmax(self.heads[0](h), dim=-1).squeeze(0)

    def log_prob_of(self, sequences) -> torch.Tensor:
        """B x 23 log-probabilities of given sequences under the current parameters."""
        return self.rollout(forced=sequences).log_probs

    def modal_sequence(self) -> List[int]:
        with torch.no_grad():
            return self.rollout(greedy=True).sequences()[0]


def sample_sequence(controller: Controller, generator: Optional[torch.Generator] = None) -> Tuple[List[int], torch.Tensor]:
    """One sequence and its 23 per-slot log-probabilities (differentiable)."""
    rollout = controller.rollout(1, generator)
    return rollout.sequences()[0], rollout.log_probs[0]


def sample_batch(controller: Controller, n: int, generator: Optional[torch.Generator] = None) -> torch.Tensor:
    """n x 23 sequences, without gradients."""
    with torch.no_grad():
        return controller.rollout(n, generator).choices


def sample_uniform_sequences(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform over each slot's options; a γ slot whose paired λ is 0 is forced to 0."""
    sequences = np.stack([rng.integers(0, c, size=n) for c in SLOT_OPTION_COUNTS], axis=1)
    for i in range(PAIR_OFFSET):
        zero = zero_lambda_choices(LAMBDA_OFFSET + i).numpy()
        blocked = zero[sequences[:, LAMBDA_OFFSET + i]]
        sequences[blocked, GAMMA_OFFSET + i] = 0
    return sequences


# --- REINFORCE ---

def update_baseline(baseline: Optional[float], reward: float, decay: float = 0.95) -> float:
    """Exponential moving average; the first reward initialises it."""
    if baseline is None:
        return float(reward)
    return decay * baseline + (1.0 - decay) * reward


def reinforce_update(
    optimizer: torch.optim.Optimizer,
    log_probs: torch.Tensor,
    reward: float,
    baseline: float,
    entropies: Optional[torch.Tensor] = None,
    entropy_weight: float = 0.0,
) -> float:
    """Ascend sum_t log P(O_t | O_<t) * (R - b). Returns the surrogate loss."""
    loss = -log_probs.sum() * (reward - baseline)
    if entropy_weight and entropies is not None:
        loss = loss - entropy_weight * entropies.sum()
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    return float(loss.item())
