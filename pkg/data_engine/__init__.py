from data_engine.interactions import ColumnSchema, InteractionEvent, InteractionLog
from data_engine.loader import (
    ValidationReport,
    load_interaction_log,
    save_interaction_log,
    validate
)
from data_engine.matrix import InteractionMatrix, observed_feedback, to_matrix

__all__ = [
    # Types
    "ColumnSchema",
    "InteractionEvent",
    "InteractionLog",
    # Loader
    "ValidationReport",
    "load_interaction_log",
    "save_interaction_log",
    "validate",
    # Matrix
    "InteractionMatrix",
    "observed_feedback",
    "to_matrix",
]
