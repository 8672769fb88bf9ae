from .components import (
    LossVector,
    anomaly_score,
    cluster_target,
    loss_adv,
    loss_cluster,
    loss_fea,
    loss_memory,
    loss_out,
    loss_rsr,
    training_loss,
)

__all__ = [
    "LossVector",
    "anomaly_score",
    "cluster_target",
    "loss_adv",
    "loss_cluster",
    "loss_fea",
    "loss_memory",
    "loss_out",
    "loss_rsr",
    "training_loss",
]
