from .metrics import MetricsReport, compute_metrics, export_report, load_report, subset_accuracy
from .trainer import (
    ClipStore,
    TrainConfig,
    cross_validate,
    evaluate,
    evaluation_pairs,
    pretrain_source,
    train,
)

__all__ = [
    "ClipStore",
    "MetricsReport",
    "TrainConfig",
    "compute_metrics",
    "cross_validate",
    "evaluate",
    "evaluation_pairs",
    "export_report",
    "load_report",
    "pretrain_source",
    "subset_accuracy",
    "train",
]
