from .controller import (
    Controller,
    Rollout,
    reinforce_update,
    sample_batch,
    sample_sequence,
    sample_uniform_sequences,
    update_baseline,
    zero_lambda_choices,
)
from .runner import (
    CandidateEvaluator,
    SearchResult,
    SearchState,
    SlotMatchingBandit,
    best_record,
    evaluate_candidate,
    load_history,
    random_search,
    run_search,
    search_curve,
    validation_auc,
)

__all__ = [
    "Controller",
    "Rollout",
    "reinforce_update",
    "sample_batch",
    "sample_sequence",
    "sample_uniform_sequences",
    "update_baseline",
    "zero_lambda_choices",
    "CandidateEvaluator",
    "SearchResult",
    "SearchState",
    "SlotMatchingBandit",
    "best_record",
    "evaluate_candidate",
    "load_history",
    "random_search",
    "run_search",
    "search_curve",
    "validation_auc",
]
