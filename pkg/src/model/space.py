"""The search space: operator sequences, their decoded TADSpec, and hand-built presets."""

import itertools
import numbers
from dataclasses import dataclass
from typing import Dict, Iterator, List, Sequence, Tuple

from pydantic import ValidationError

from src.errors import DecodeError
from src.schemas.pydantic_schemas import (
    BLOCK_OPTION_COUNTS,
    COMPONENT_NAMES,
    LAMBDA1_OPTIONS,
    LAMBDA_OPTIONS,
    WeightVectors,
)

ARCHITECTURE_SLOTS: Tuple[str, ...] = ("ipm", "fexm_1st", "fexm_2nd", "fenm_1st", "fenm_2nd", "ffm", "om")
SLOT_NAMES: Tuple[str, ...] = (
    ARCHITECTURE_SLOTS
    + tuple(f"lambda_{name}" for name in COMPONENT_NAMES)
    + tuple(f"gamma_{name}" for name in COMPONENT_NAMES)
)
SLOT_OPTION_COUNTS: Tuple[int, ...] = (
    tuple(BLOCK_OPTION_COUNTS[slot.split("_")[0]] for slot in ARCHITECTURE_SLOTS)
    + (len(LAMBDA1_OPTIONS),) + (len(LAMBDA_OPTIONS),) * 7
    + (2,) * 8
)
SEQUENCE_LENGTH = len(SLOT_NAMES)
LAMBDA_OFFSET = len(ARCHITECTURE_SLOTS)
GAMMA_OFFSET = LAMBDA_OFFSET + len(COMPONENT_NAMES)
# Value of a γ slot meaning "score with the paired λ"
USE_LAMBDA = 1

VARIANT_NAMES: Dict[str, Tuple[str, ...]] = {
    "ipm": ("real position", "relative position", "real + relative position"),
    "fexm": (
        "sparse graph convolution",
        "multilayer perceptron",
        "spatio-temporal graph convolution",
        "LSTM motion encoder",
        "graph attention crowd interaction",
    ),
    "fenm": ("none", "energy-gated refinement", "attention pooling", "temporal LSTM"),
    "ffm": ("concatenate all features", "concatenate enhanced features"),
    "om": ("temporal convolution", "time-extrapolator convolution", "fully connected", "LSTM + linear"),
}


@dataclass(frozen=True)
class AuxiliaryFlags:
    memory: bool
    clustering: bool
    rsr: bool
    discriminator: bool

    def names(self) -> List[str]:
        return [name for name, on in self.__dict__.items() if on]


def auxiliary_flags(lambdas: Sequence[float]) -> AuxiliaryFlags:
    """Which auxiliary structures a model needs, derived from Λ alone."""
    weight = dict(zip(COMPONENT_NAMES, lambdas))
    return AuxiliaryFlags(
        memory=weight["com"] != 0 or weight["sep"] != 0,
        clustering=weight["clu"] != 0,
        rsr=weight["rsr1"] != 0 or weight["rsr2"] != 0,
        discriminator=weight["adv"] != 0 or weight["fea"] != 0,
    )


@dataclass(frozen=True)
class TADSpec:
    """Decoded operator sequence: 7 architecture variant ids (1-based) plus Λ and Γ."""
    architecture: Tuple[int, int, int, int, int, int, int]
    weights: WeightVectors

    @property
    def lambdas(self) -> Tuple[float, ...]:
        return self.weights.lambdas

    @property
    def gammas(self) -> Tuple[float, ...]:
        return self.weights.gammas

    @property
    def auxiliaries(self) -> AuxiliaryFlags:
        return auxiliary_flags(self.weights.lambdas)


# --- 1. Decoding and encoding ---

def decode(sequence: Sequence[int]) -> TADSpec:
    """Operator sequence -> TADSpec. A γ slot asking for a zero λ is coerced to 0."""
    if len(sequence) != SEQUENCE_LENGTH:
        raise DecodeError(f"operator sequence has {len(sequence)} slots, expected {SEQUENCE_LENGTH}")
    for name, count, value in zip(SLOT_NAMES, SLOT_OPTION_COUNTS, sequence):
        if isinstance(value, bool) or not isinstance(value, numbers.Integral) or not 0 <= value < count:
            raise DecodeError(f"slot {name} has value {value!r}, expected an integer in 0..{count - 1}")
    sequence = [int(v) for v in sequence]

    architecture = tuple(v + 1 for v in sequence[:LAMBDA_OFFSET])
    lambdas = [LAMBDA1_OPTIONS[sequence[LAMBDA_OFFSET]]]
    lambdas += [LAMBDA_OPTIONS[v] for v in sequence[LAMBDA_OFFSET + 1:GAMMA_OFFSET]]
    gammas = [lam if gate == USE_LAMBDA else 0.0 for lam, gate in zip(lambdas, sequence[GAMMA_OFFSET:])]
    return TADSpec(architecture=architecture, weights=WeightVectors(lambdas=lambdas, gammas=gammas))


def encode(spec: TADSpec) -> List[int]:
    sequence = [v - 1 for v in spec.architecture]
    sequence.append(LAMBDA1_OPTIONS.index(spec.lambdas[0]))
    sequence += [LAMBDA_OPTIONS.index(lam) for lam in spec.lambdas[1:]]
    sequence += [USE_LAMBDA if gam != 0 else 0 for gam in spec.gammas]
    return sequence


def parse_sequence(text: str) -> List[int]:
    """'1,0,...' -> list of 23 slot values."""
    try:
        values = [int(part) for part in text.replace(" ", "").split(",") if part]
    except ValueError:
        raise DecodeError(f"operator sequence {text!r} must be comma-separated integers")
    decode(values)
    return values


def make_spec(architecture: Sequence[int], lambdas: Dict[str, float], gammas: Dict[str, float]) -> TADSpec:
    """Build a spec from named weights; unnamed components get weight 0."""
    try:
        weights = WeightVectors(
            lambdas=[lambdas.get(name, 0.0) for name in COMPONENT_NAMES],
            gammas=[gammas.get(name, 0.0) for name in COMPONENT_NAMES],
        )
    except ValidationError as e:
        raise DecodeError(f"invalid weights: {e.errors()[0]['msg']}")
    return TADSpec(architecture=tuple(architecture), weights=weights)


# --- 2. Enumeration ---

def iterate_architectures() -> Iterator[Tuple[int, ...]]:
    return itertools.product(*(range(1, c + 1) for c in SLOT_OPTION_COUNTS[:LAMBDA_OFFSET]))


def iterate_lambda_settings() -> Iterator[Tuple[float, ...]]:
    return itertools.product(LAMBDA1_OPTIONS, *([LAMBDA_OPTIONS] * 7))


# --- 3. Hand-built baselines ---

# Graph-convolution backbone: relative positions, sparse GCN in both branches, no enhancement,
# time-extrapolator output.
BACKBONE = (2, 1, 1, 1, 1, 1, 2)


def manual_presets() -> Dict[str, TADSpec]:
    """Backbone combined with the training / scoring recipes of four well-known detectors,
    plus memory and clustering together."""
    return {
        "mnad": make_spec(BACKBONE, {"out": 1.0, "com": 0.1, "sep": 0.1}, {"out": 1.0, "com": 0.1}),
        "pnet": make_spec(BACKBONE, {"out": 1.0, "adv": 0.1, "fea": 0.1}, {"out": 1.0, "fea": 0.1}),
        "rsrae": make_spec(BACKBONE, {"out": 1.0, "rsr1": 0.1, "rsr2": 0.1}, {"out": 1.0, "rsr1": 0.1}),
        "gepc": make_spec(BACKBONE, {"out": 1.0, "clu": 0.1}, {"out": 1.0, "clu": 0.1}),
        "mnad_gepc": make_spec(
            BACKBONE,
            {"out": 1.0, "com": 0.1, "sep": 0.1, "clu": 0.1},
            {"out": 1.0, "com": 0.1, "clu": 0.1},
        ),
    }


def describe_spec(spec: TADSpec) -> str:
    """Readable rendering written next to every checkpoint."""
    lines = ["architecture:"]
    for slot, variant in zip(ARCHITECTURE_SLOTS, spec.architecture):
        label = VARIANT_NAMES[slot.split("_")[0]][variant - 1]
        lines.append(f"  {slot.upper():<9} {variant}  {label}")
    lines.append("loss weights:  " + " ".join(f"{n}={w:g}" for n, w in zip(COMPONENT_NAMES, spec.lambdas)))
    lines.append("score weights: " + " ".join(f"{n}={w:g}" for n, w in zip(COMPONENT_NAMES, spec.gammas)))
    lines.append("auxiliaries:   " + (", ".join(spec.auxiliaries.names()) or "none"))
    lines.append("operator sequence: " + ",".join(str(v) for v in encode(spec)))
    return "\n".join(lines) + "\n"
