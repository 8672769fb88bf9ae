from .pipeline import (
    compare_models,
    evaluate,
    filter_predictions,
    load_evaluations,
    load_split,
    merge_auc,
    plot,
    prepare,
    random_baseline,
    read_manifest,
    regenerate_negatives,
    resolve_spec,
    run_paths,
    score,
    search,
    sensitivity_sweeps,
    train_final,
)

__all__ = [
    "compare_models",
    "evaluate",
    "filter_predictions",
    "load_evaluations",
    "load_split",
    "merge_auc",
    "plot",
    "prepare",
    "random_baseline",
    "read_manifest",
    "regenerate_negatives",
    "resolve_spec",
    "run_paths",
    "score",
    "search",
    "sensitivity_sweeps",
    "train_final",
]
