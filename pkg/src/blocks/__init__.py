from .architecture import (
    AttentionPooling,
    CrowdGAT,
    EnergyGate,
    FeatureBundle,
    FeatureExtractor,
    FullyConnectedDecoder,
    IdentityEnhancer,
    MotionLSTM,
    RecurrentDecoder,
    SparseGraphConv,
    SpatioTemporalGCN,
    TemporalConvDecoder,
    TemporalLSTM,
    TimeExtrapolator,
    TrajectoryMLP,
    build_fenm,
    build_fexm,
    build_om,
    ffm_apply,
    ffm_width,
    ipm_apply,
    ipm_channels,
    pool_time,
)
from .auxiliary import (
    ClusterHead,
    MemoryBank,
    MemoryRead,
    RSRProjection,
    TrajectoryDiscriminator,
    cluster_assign,
    discriminator_score,
    memory_query,
    rsr_project,
)

__all__ = [
    "AttentionPooling",
    "CrowdGAT",
    "EnergyGate",
    "FeatureBundle",
    "FeatureExtractor",
    "FullyConnectedDecoder",
    "IdentityEnhancer",
    "MotionLSTM",
    "RecurrentDecoder",
    "SparseGraphConv",
    "SpatioTemporalGCN",
    "TemporalConvDecoder",
    "TemporalLSTM",
    "TimeExtrapolator",
    "TrajectoryMLP",
    "build_fenm",
    "build_fexm",
    "build_om",
    "ffm_apply",
    "ffm_width",
    "ipm_apply",
    "ipm_channels",
    "pool_time",
    "ClusterHead",
    "MemoryBank",
    "MemoryRead",
    "RSRProjection",
    "TrajectoryDiscriminator",
    "cluster_assign",
    "discriminator_score",
    "memory_query",
    "rsr_project",
]
