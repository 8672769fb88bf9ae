from .space import (
    ARCHITECTURE_SLOTS,
    SEQUENCE_LENGTH,
    SLOT_NAMES,
    SLOT_OPTION_COUNTS,
    AuxiliaryFlags,
    TADSpec,
    auxiliary_flags,
    decode,
    describe_spec,
    encode,
    iterate_architectures,
    iterate_lambda_settings,
    make_spec,
    manual_presets,
    parse_sequence,
)
from .tad_model import ForwardOutput, TADModel, build, build_from_config, load_checkpoint, save_checkpoint

__all__ = [
    "ARCHITECTURE_SLOTS",
    "SEQUENCE_LENGTH",
    "SLOT_NAMES",
    "SLOT_OPTION_COUNTS",
    "AuxiliaryFlags",
    "TADSpec",
    "auxiliary_flags",
    "decode",
    "describe_spec",
    "encode",
    "iterate_architectures",
    "iterate_lambda_settings",
    "make_spec",
    "manual_presets",
    "parse_sequence",
    "ForwardOutput",
    "TADModel",
    "build",
    "build_from_config",
    "load_checkpoint",
    "save_checkpoint",
]
