"""
Observed Data types: interaction events, the sorted interaction log, and
the column schema used to read public datasets without rewriting them.
"""

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, field_validator

Scalar = Union[int, float, str, bool]
FeedbackRange = Tuple[float, float]


class ColumnSchema(BaseModel):
    """Maps the framework's column roles to the names used in a CSV file."""
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    user_id: str = "user_id"
    item_id: str = "item_id"
    feedback: str = "feedback"
    timestamp: str = "timestamp"
    propensity: Optional[str] = "propensity"
    feedback_range: Optional[FeedbackRange] = None

    @field_validator("feedback_range")
    @classmethod
    def _ordered(cls, value):
        if value is not None and not value[0] < value[1]:
            raise ValueError(f"feedback_range must satisfy f_min < f_max, got {list(value)}")
        return value

    def role_columns(self) -> Dict[str, str]:
        columns = {
            "user_id": self.user_id,
            "item_id": self.item_id,
            "feedback": self.feedback,
            "timestamp": self.timestamp,
        }
        if self.propensity:
            columns["propensity"] = self.propensity
        return columns


@dataclass(frozen=True)
class InteractionEvent:
    user: str
    item: str
    feedback: float
    timestamp: int
    propensity: Optional[float] = None
    # treated as read-only once the event is built
    context: Dict[str, Scalar] = field(default_factory=dict)

    def __post_init__(self):
        if not self.user or not self.item:
            raise ValueError("user and item ids must be non-empty")
        if self.propensity is not None and not 0.0 < self.propensity <= 1.0:
            raise ValueError(f"propensity must be in (0, 1], got {self.propensity}")


@dataclass(frozen=True)
class InteractionLog:
    events: Tuple[InteractionEvent, ...]
    feedback_range: FeedbackRange
    users: FrozenSet[str]
    items: FrozenSet[str]

    @classmethod
    def from_events(
        cls,
        events: Iterable[InteractionEvent],
        feedback_range: Optional[FeedbackRange] = None,
    ) -> "InteractionLog":
        # sorted() is stable, so equal timestamps keep input order
        ordered = tuple(sorted(events, key=lambda e: e.timestamp))
        if feedback_range is None:
            if ordered:
                values = [e.feedback for e in ordered]
                feedback_range = (min(values), max(values))
            else:
                feedback_range = (0.0, 0.0)
        return cls(
            events=ordered,
            feedback_range=(float(feedback_range[0]), float(feedback_range[1])),
            users=frozenset(e.user for e in ordered),
            items=frozenset(e.item for e in ordered),
        )

    def __len__(self) -> int:
        return len(self.events)

    @property
    def context_keys(self) -> FrozenSet[str]:
        return frozenset(k for e in self.events for k in e.context)

    def sorted_users(self) -> Tuple[str, ...]:
        return tuple(sorted(self.users))

    def sorted_items(self) -> Tuple[str, ...]:
        return tuple(sorted(self.items))
