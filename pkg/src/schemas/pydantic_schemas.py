from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import List, Optional, Dict, Tuple
from enum import Enum

# --- Option tables of the search space ---

# Loss weight options. λ1 (output error) is never switched off.
LAMBDA1_OPTIONS: Tuple[float, ...] = (0.1, 0.01, 1.0)
LAMBDA_OPTIONS: Tuple[float, ...] = (0.0, 0.1, 0.01, 1.0)

# Variant counts per architecture block family.
BLOCK_OPTION_COUNTS: Dict[str, int] = {"ipm": 3, "fexm": 5, "fenm": 4, "ffm": 2, "om": 4}

COMPONENT_NAMES: Tuple[str, ...] = ("out", "adv", "fea", "com", "sep", "clu", "rsr1", "rsr2")


# --- Enums for closed choice sets ---

class Strategy(str, Enum):
    """How candidate operator sequences are proposed."""
    REINFORCE = "reinforce"
    RANDOM = "random"

class SamplerKind(str, Enum):
    """Stochastic trajectory predictor used to produce sample sets."""
    CV_GAUSSIAN = "cv-gaussian"
    RECURRENT_GAUSSIAN = "recurrent-gaussian"

class BestMode(str, Enum):
    """Best = per-pedestrian minimum (assembled) or best whole sample."""
    ASSEMBLED = "assembled"
    SAMPLE = "sample"

class WorstMode(str, Enum):
    """Worst = worst whole sample or per-pedestrian maximum (assembled)."""
    SAMPLE = "sample"
    ASSEMBLED = "assembled"


# --- 1. Model description schemas ---

class BlockConfig(BaseModel):
    """Construction parameters of one architecture block."""
    model_config = ConfigDict(frozen=True)

    slot: str
    variant_id: int
    hidden_dim: int = Field(64, ge=1)
    # Set on built blocks: per-frame (N x t x H) or pooled (N x H) output
    keeps_time: Optional[bool] = None

    @model_validator(mode="after")
    def _variant_in_range(self):
        family = self.slot.split("_")[0]
        if family not in BLOCK_OPTION_COUNTS:
            raise ValueError(f"unknown block slot {self.slot!r}")
        count = BLOCK_OPTION_COUNTS[family]
        if not 1 <= self.variant_id <= count:
            raise ValueError(f"{self.slot} variant {self.variant_id} outside 1..{count}")
        return self


class WeightVectors(BaseModel):
    """Loss weights Λ and scoring weights Γ, ordered like COMPONENT_NAMES."""
    model_config = ConfigDict(frozen=True)

    lambdas: Tuple[float, float, float, float, float, float, float, float]
    gammas: Tuple[float, float, float, float, float, float, float, float]

    @field_validator("lambdas")
    @classmethod
    def _lambda_options(cls, value):
        if value[0] not in LAMBDA1_OPTIONS:
            raise ValueError(f"λ1={value[0]} not in {LAMBDA1_OPTIONS}")
        for name, lam in zip(COMPONENT_NAMES[1:], value[1:]):
            if lam not in LAMBDA_OPTIONS:
                raise ValueError(f"λ[{name}]={lam} not in {LAMBDA_OPTIONS}")
        return value

    @model_validator(mode="after")
    def _gamma_paired(self):
        for name, lam, gam in zip(COMPONENT_NAMES, self.lambdas, self.gammas):
            if gam not in (0.0, lam):
                raise ValueError(f"γ[{name}]={gam} must be 0 or its paired λ={lam}")
        return self


# --- 2. Search schemas ---

class SearchRecord(BaseModel):
    """One evaluated candidate of a search run (one line of history.jsonl)."""
    index: int
    sequence: List[int]
    reward: float = Field(ge=0.0, le=1.0)
    wall_time: float
    strategy: Strategy
    # Why the reward was forced to chance level, when it was
    diagnostic: Optional[str] = None

    @field_validator("sequence")
    @classmethod
    def _length(cls, value):
        if len(value) != 23:
            raise ValueError(f"operator sequence has {len(value)} slots, expected 23")
        return value


# --- 3. Data schemas ---

class SplitManifest(BaseModel):
    """What `prepare` wrote and how to reproduce it."""
    held_out_scene: str
    scenes: List[str]
    seed: int
    noise_bound: float
    val_fraction: float
    t_obs: int
    t_pred: int
    window_stride: int
    counts: Dict[str, int]
    checksums: Dict[str, str]
    format_version: int


class SamplerConfig(BaseModel):
    """Settings of a stochastic trajectory sampler."""
    kind: SamplerKind = SamplerKind.CV_GAUSSIAN
    num_samples: int = Field(50, ge=1)
    sigma: float = Field(0.3, ge=0.0)
    seed: int = 0


# --- 4. Evaluation schemas ---

class MetricReport(BaseModel):
    """Best / Average / Worst displacement errors of one sample set."""
    best_ade: float
    best_fde: float
    average_ade: float
    average_fde: float
    worst_ade: float
    worst_fde: float


# --- 5. Run configuration ---

class RunConfig(BaseModel):
    """Every knob of a pipeline run. Defaults follow the published experimental setup."""
    model_config = ConfigDict(extra="forbid")

    run_dir: str = "runs/default"
    seed: int = 0

    # Data
    scenes: Dict[str, str] = Field(default_factory=dict)
    held_out: Optional[str] = None
    columns: str = "frame ped x y"
    t_obs: int = Field(8, ge=2)
    t_pred: int = Field(12, ge=2)
    window_stride: int = Field(1, ge=1)
    val_fraction: float = Field(0.2, gt=0.0, lt=1.0)
    noise_bound: float = Field(0.1, gt=0.0)
    synthetic_scenes: int = Field(5, ge=2)
    synthetic_frames: int = Field(80, ge=24)
    synthetic_pedestrians: int = Field(6, ge=1)

    # Search
    strategy: Strategy = Strategy.REINFORCE
    budget: int = Field(100, ge=1)
    max_seconds: Optional[float] = None
    workers: int = Field(1, ge=1)
    checkpoint_every: int = Field(1, ge=1)
    resume: bool = True
    embedding_size: int = 100
    hidden_size: int = 100
    controller_lr: float = 3.5e-4
    baseline_decay: float = Field(0.95, ge=0.0, lt=1.0)
    entropy_weight: float = Field(0.0, ge=0.0)
    # Candidates over which the entropy bonus decays linearly to zero; None keeps it constant
    entropy_anneal: Optional[int] = Field(None, ge=1)

    # Trajectory AD models
    hidden_dim: int = Field(64, ge=1)
    model_lr: float = 1e-3
    candidate_epochs: int = Field(3, ge=0)
    final_epochs: int = Field(50, ge=0)
    memory_size: int = Field(10, ge=2)
    n_clusters: int = Field(8, ge=2)
    sep_margin: float = 1.0
    hinged_separateness: bool = True
    preset: Optional[str] = None
    # 23 comma-separated integers; overrides the searched best spec
    spec: Optional[str] = None

    # Trajectory prediction filtering
    sampler: SamplerKind = SamplerKind.CV_GAUSSIAN
    num_samples: int = Field(50, ge=1)
    top_k: int = Field(10, ge=1)
    sigma: float = Field(0.3, ge=0.0)
    sampler_epochs: int = Field(20, ge=1)
    samples_dir: Optional[str] = None
    oracle_scorer: bool = False
    psi_sweep: List[int] = Field(default_factory=lambda: [5, 10, 15, 20, 25])
    num_samples_sweep: List[int] = Field(default_factory=lambda: [20, 40, 60, 80, 100])
    best_mode: BestMode = BestMode.ASSEMBLED
    worst_mode: WorstMode = WorstMode.SAMPLE

    @field_validator("spec", mode="before")
    @classmethod
    def _spec_is_a_sequence(cls, value):
        if value is None:
            return value
        if isinstance(value, (list, tuple)) and all(isinstance(v, int) and not isinstance(v, bool) for v in value):
            value = ",".join(str(v) for v in value)
        if not isinstance(value, str):
            raise ValueError(f"spec must be 23 comma-separated integers, got {value!r}")
        parts = [p.strip() for p in value.split(",")]
        if len(parts) != 23 or not all(p.lstrip("-").isdigit() for p in parts):
            raise ValueError(f"spec must be 23 comma-separated integers, got {value!r}")
        return ",".join(parts)

    def sampler_config(self, num_samples: Optional[int] = None) -> SamplerConfig:
        return SamplerConfig(
            kind=self.sampler,
            num_samples=num_samples or self.num_samples,
            sigma=self.sigma,
            seed=self.seed,
        )
