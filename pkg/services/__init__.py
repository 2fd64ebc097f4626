from services.experiment_service import (
    parse_schema,
    validate_data,
    author_manifest,
    run_experiment,
    write_run_artifacts,
    parse_reward_model,
    evaluate_offpolicy,
    compare_reports
)

__all__ = [
    "parse_schema",
    "validate_data",
    "author_manifest",
    "run_experiment",
    "write_run_artifacts",
    "parse_reward_model",
    "evaluate_offpolicy",
    "compare_reports"
]
