from .pydantic_schemas import (
    BlockConfig,
    MetricReport,
    RunConfig,
    SamplerConfig,
    SearchRecord,
    SplitManifest,
    WeightVectors,
)
from .config_loader import load_run_config, dump_run_config, parse_cli_overrides

__all__ = [
    "BlockConfig",
    "MetricReport",
    "RunConfig",
    "SamplerConfig",
    "SearchRecord",
    "SplitManifest",
    "WeightVectors",
    "load_run_config",
    "dump_run_config",
    "parse_cli_overrides",
]
